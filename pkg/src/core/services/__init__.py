"""
Serviços do laboratório: perdas, estatísticas, síntese, treino e avaliação.
"""
