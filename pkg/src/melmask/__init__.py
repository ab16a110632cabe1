"""Streaming speech enhancement with quantized sparse LSTMs.

Core pieces: fixed-point arithmetic (quant), sparse weight encodings
(sparse), the spectral front end (dsp, loudness), the streaming engine
(engine), magnitude pruning and sparsity search (compress), deployment
estimators (analysis), the binary model container (container), and a
FastAPI service plus thin CLI on top.
"""

__version__ = "0.1.0"
