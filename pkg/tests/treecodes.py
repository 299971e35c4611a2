"""Random cycle-free Tanner graphs and exhaustive bitwise MAP."""
import itertools

import numpy as np
from scipy.special import logsumexp


def tree_code(rng, n):
    """Parity-check matrix of a random tree-shaped Tanner graph on n variables."""
    while True:
        m = int(rng.integers(1, max(2, n // 2) + 1))
        placed_v, placed_c = [0], []
        rest = [("v", i) for i in range(1, n)] + [("c", j) for j in range(m)]
        rng.shuffle(rest)
        H = np.zeros((m, n), dtype=np.uint8)
        while rest:
            x = next(x for x in rest if (x[0] == "c") or placed_c)
            rest.remove(x)
            if x[0] == "c":
                H[x[1], placed_v[rng.integers(len(placed_v))]] = 1
                placed_c.append(x[1])
            else:
                H[placed_c[rng.integers(len(placed_c))], x[1]] = 1
                placed_v.append(x[1])
        H = H[H.sum(1) >= 2]
        if len(H):
            return H


def map_llr(H, L):
    """log P(x_v=1|L) / P(x_v=0|L) over all codewords of H."""
    n = H.shape[1]
    words = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    cw = words[~((words @ H.T.astype(np.int64)) % 2).any(axis=1)]
    w = cw @ L
    return np.array([logsumexp(w[cw[:, v] == 1]) - logsumexp(w[cw[:, v] == 0]) for v in range(n)])
