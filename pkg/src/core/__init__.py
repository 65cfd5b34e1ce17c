"""
Módulo core - configuração, erros e orquestração do laboratório.
"""
