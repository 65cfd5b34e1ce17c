"""
Módulo clients - leitura e escrita de arquivos.
"""
