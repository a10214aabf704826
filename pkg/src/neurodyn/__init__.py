"""neurodyn - Neurodynamische Optimierung mit Integratoren und einem OINN-Loeser."""

__version__ = "0.1.0"
