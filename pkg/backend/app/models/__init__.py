"""
Módulo de modelos de datos de la aplicación.
"""
