"""
advlab - Benign overfitting vs. adversarial robustness lab
Numerics for overparameterized ridge / NTK models and the experiment runner built on them
"""

__version__ = "0.1.0"
