"""
Pacote principal do laboratório de perdas com margem adaptativa.
"""
