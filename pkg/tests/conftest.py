"""
测试公共夹具：固定种子的随机数发生器、摆链与随机树模型。
"""

import numpy as np
import pytest

from galint.model import chain_model, random_tree


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def pendulum():
    """单摆：质量 1，杆长 1，重力沿 −y。"""
    return chain_model(1)


@pytest.fixture
def double_pendulum():
    return chain_model(2)


@pytest.fixture
def chain4():
    return chain_model(4)


@pytest.fixture
def tree(rng):
    """混合转动/移动关节的 5 体随机树。"""
    return random_tree(rng, 5)


def _random_control_points(rng, scheme, n, dt, spread=1e-2):
    """在随机 (q⁰, q̇⁰) 的线性轨迹附近扰动得到的控制点。"""
    q0 = rng.uniform(-np.pi / 2, np.pi / 2, size=n)
    qdot0 = rng.uniform(-1.0, 1.0, size=n)
    qbar = q0[None, :] + np.outer(scheme.nodes * dt, qdot0) + spread * dt * rng.standard_normal((scheme.num_nodes, n))
    qbar[0] = q0
    return qbar, qdot0


@pytest.fixture
def control_points(rng):
    """control_points(scheme, n, dt) -> (qbar, qdot0)。"""

    def make(scheme, n, dt, spread=1e-2):
        return _random_control_points(rng, scheme, n, dt, spread)

    return make
