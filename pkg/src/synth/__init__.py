# Synthetic Populations - Seeded Personas & Planted Signal
