"""
计数器型随机数流：每个路径块一条独立的 Philox 流

块的划分只取决于 (路径数, 块大小)，与线程数无关；
正态变量用逆CDF生成，因此每条路径的随机数只取决于 (seed, 路径索引)。
"""

from typing import List, Tuple

import numpy as np
from scipy.special import ndtri

# 避免 ndtri(0) = -inf
_U_MIN = 2.0 ** -54


def block_ranges(paths: int, block_size: int) -> List[Tuple[int, int]]:
    """将 [0, paths) 切分为固定大小的块"""
    return [(start, min(start + block_size, paths)) for start in range(0, paths, block_size)]


def block_generator(seed: int, block_index: int) -> np.random.Generator:
    """由 (seed, 块索引) 键控的 Philox 生成器"""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block_index),))
    return np.random.Generator(np.random.Philox(seq))


def inverse_cdf_normals(gen: np.random.Generator, shape) -> np.ndarray:
    """标准正态变量 Φ⁻¹(U)"""
    u = gen.random(shape)
    np.maximum(u, _U_MIN, out=u)
    return ndtri(u)


def block_normals(seed: int, block_index: int, steps: int, n_paths: int, dim: int = 2) -> np.ndarray:
    """一个块的全部冲击，形状 (steps, n_paths, dim)"""
    return inverse_cdf_normals(block_generator(seed, block_index), (steps, n_paths, dim))
