"""
Testes do laboratório de perdas com margem adaptativa.
"""
