"""
数据验证工具
"""

from typing import Any, List

import numpy as np

from atsm.models.data_models import ModelKind, PanelData, PhysicalParams, SimConfig

# 声明类型与β结构一致性的容差
KIND_TOL = 1e-9


def validate_finite(name: str, value: Any) -> List[str]:
    """验证数组元素均为有限实数"""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        return [f"{name}包含非有限值"]
    return []


def validate_identification(p: PhysicalParams) -> List[str]:
    """验证各模型类型的识别约束"""
    errors = []

    if abs(p.sigma[0, 0] - 1.0) > KIND_TOL:
        errors.append(f"sigma[0][0]必须为1 (当前 {p.sigma[0, 0]:g})")

    if p.kind in (ModelKind.PROPORTIONAL, ModelKind.DEPENDENT):
        if np.max(np.abs(p.beta[0] - p.beta[1])) > KIND_TOL:
            errors.append("beta[1]必须等于beta[0] (k=1归一化)")

    if p.kind == ModelKind.PROPORTIONAL:
        if abs(p.sigma[0, 1]) > KIND_TOL:
            errors.append(f"sigma[0][1]在比例模型中必须为0 (当前 {p.sigma[0, 1]:g})")
        if abs(p.alpha[1] - p.alpha[0]) > KIND_TOL:
            errors.append("alpha[1]在比例模型中必须等于alpha[0] (c=0)")

    if p.kind == ModelKind.DEPENDENT and p.dependent_offset <= 0.0:
        errors.append(f"alpha[1]-alpha[0]在相依模型中必须大于0 (当前 {p.dependent_offset:g})")

    if p.kind == ModelKind.INDEPENDENT:
        if abs(p.sigma[1, 1] - 1.0) > KIND_TOL:
            errors.append(f"sigma[1][1]在独立模型中必须为1 (当前 {p.sigma[1, 1]:g})")
        scale = max(float(np.sum(p.beta ** 2)), 1.0)
        if abs(np.linalg.det(p.beta)) <= KIND_TOL * scale:
            errors.append("beta在独立模型中必须可逆 (det beta = 0)")

    return errors


def validate_physical_params(p: PhysicalParams) -> List[str]:
    """验证物理参数"""
    errors = []

    for name in ("a_hat", "b_hat", "alpha", "beta", "sigma", "lam"):
        errors.extend(validate_finite(name, getattr(p, name)))

    for name in ("omega_pi", "omega_s", "nu0", "nu1", "nu2"):
        value = getattr(p, name)
        if not np.isfinite(value) or value < 0:
            errors.append(f"{name}必须是非负数")

    if not errors:
        errors.extend(validate_identification(p))

    return errors


def validate_sim_config(cfg: SimConfig) -> List[str]:
    """验证模拟配置"""
    errors = []

    if not isinstance(cfg.paths, int) or cfg.paths < 1:
        errors.append("paths必须是正整数")
    if not isinstance(cfg.horizon, int) or cfg.horizon < 1:
        errors.append("horizon必须是正整数")
    if not 0.0 < cfg.ci_level < 1.0:
        errors.append("ci_level必须在0和1之间")
    if cfg.threads is not None and cfg.threads < 1:
        errors.append("threads必须是正整数")
    if cfg.block_size < 1:
        errors.append("block_size必须是正整数")
    if not 0 <= cfg.seed < 2 ** 64:
        errors.append("seed必须是64位无符号整数")

    return errors


def validate_panel(panel: PanelData) -> List[str]:
    """验证面板形状与期限集合"""
    errors = []
    T = panel.n_quarters

    if T == 0:
        errors.append("面板为空")
        return errors

    if panel.short_rate.shape != (T,):
        errors.append("short_rate长度与季度数不一致")
    if panel.inflation.shape != (T,):
        errors.append("inflation长度与季度数不一致")
    for n, series in panel.yields.items():
        if n < 1:
            errors.append(f"期限y{n}必须是正整数季度")
        if series.shape != (T,):
            errors.append(f"y{n}长度与季度数不一致")

    return errors


def unobserved_quarters(panel: PanelData) -> List[int]:
    """没有任何观测值的季度下标 (短期利率、通胀与各期限收益率全部缺失)"""
    observed = np.isfinite(panel.short_rate) | np.isfinite(panel.inflation)
    for series in panel.yields.values():
        observed |= np.isfinite(series)
    return [int(i) for i in np.flatnonzero(~observed)]
