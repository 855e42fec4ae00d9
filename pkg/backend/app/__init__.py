"""
mfflsim - simulador de aprendizaje federado de campo medio
"""

__version__ = "0.3.0"
