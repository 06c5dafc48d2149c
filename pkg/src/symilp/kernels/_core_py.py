"""Pure numpy fallback for the edge aggregation kernel.

np.add.at applies the additions unbuffered in edge order, the same order the
compiled loop uses, so the two backends agree bit for bit.
"""

import numpy as np


def edge_aggregate(src, src_idx, dst_idx, weights, num_dst):
    """out[dst_idx[e], :] += weights[e] * src[src_idx[e], :] over all edges."""
    out = np.zeros((int(num_dst), src.shape[1]), dtype=np.float64)
    if len(src_idx):
        np.add.at(out, dst_idx, src[src_idx] * weights[:, None])
    return out
