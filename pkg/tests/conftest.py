import os

# Single-threaded BLAS before numpy loads anywhere in the test process, so
# results do not depend on the host's core count.
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import sys

sys.path.insert(0, os.path.dirname(__file__))
