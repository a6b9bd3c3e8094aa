"""Sequence-learning lab for irregularly sampled multi-label image streams.

Time-modulated LSTM cells with hand-derived backpropagation through time, an
event-driven synthetic digit-sequence simulator, and a command-line harness
that reproduces the packaged classification benchmark end to end.
"""

import os

# Keep BLAS single-threaded: the matrices here are tiny, and fixed threading
# keeps results independent of the host's core count.  Must happen before
# numpy is first imported, which is why it sits at the top of the package.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
