# Core package initialization: dataset, model, objective, variants and evaluation
