"""
Ferramentas e utilitários do laboratório.
"""
