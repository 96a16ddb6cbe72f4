# ML Layer - Random Forest, MLP, Model Persistence
