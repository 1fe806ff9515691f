"""Model-side bridge for the slideret retrieval engine.

Generates slide captions, exports single- and multi-vector embedding
stores, and serves rerankers over the engine's scorer line protocol.
All model access lives behind a backend registry; the ``stub`` backend
is deterministic and runs without any model weights, so formats and
protocols can be exercised on any machine.
"""

__version__ = "0.1.0"
