# Signal Layer - Interaction Labels (Stage 1) & Cluster Validation
