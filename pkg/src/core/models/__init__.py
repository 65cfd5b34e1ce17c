"""
Modelos de dados do laboratório (configurações, lotes, resultados).
"""
