# Processing Layer - Ingest, Cleaning, Scaling & Splitting
