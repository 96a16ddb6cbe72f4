# Experiments - Pipeline Specs, Runner, Evaluation & Exports
