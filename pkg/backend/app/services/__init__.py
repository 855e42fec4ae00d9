"""
Módulo de servicios de la aplicación.
"""
