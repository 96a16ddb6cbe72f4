# I-HOPE - interpretable two-stage PHQ-4 prediction from behavioural sensing
__version__ = "0.1.0"
