# Analysis Layer - Feature Engineering, Correlation & Ranking
