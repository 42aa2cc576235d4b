"""Finite-difference verification of every registered operation.

Each check builds a scalar loss from random small inputs, compares the
analytic gradient against central differences, and reports the relative
error. Used by the CLI `gradcheck` subcommand and by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import model as mdl
from .autodiff import Tensor, numerical_grad, parameter
from .channel import normalize_power_tensor
from .constellation import (QuantizerConfig, make_qam, soft_assignment_node,
                            soft_quantize, quantize_straight_through)


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_rel_err: float
    passed: bool


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)


def check_op(name: str, build, x0: np.ndarray, tol: float = 1e-4,
             eps: float = 1e-5) -> CheckResult:
    """`build` maps a parameter Tensor to a scalar loss Tensor."""
    p = parameter(x0.copy())
    loss = build(p)
    loss.backward()
    numeric = numerical_grad(lambda x: float(build(Tensor(x)).data), x0, eps)
    err = _rel_err(p.grad, numeric)
    return CheckResult(name, err, err < tol)


def run_all(seed: int = 0) -> list[CheckResult]:
    rng = np.random.Generator(np.random.Philox(key=[seed, 0x6C]))
    r = rng.standard_normal
    results = []

    a = r((3, 4))
    a2 = r((3, 4))
    results.append(check_op("add", lambda p: ad.tsum(p + Tensor(a)), r((3, 4))))
    results.append(check_op(
        "add_broadcast",
        lambda p: ad.tsum(ad.square(Tensor(a2) + p)), r(4)))
    results.append(check_op("mul", lambda p: ad.tsum(p * Tensor(a) * p), r((3, 4))))
    results.append(check_op("div", lambda p: ad.tsum(Tensor(a) / (p * p + 2.0)), r((3, 4))))
    b = r((4, 2))
    results.append(check_op("matmul", lambda p: ad.tsum(ad.matmul(p, Tensor(b))), r((3, 4))))
    results.append(check_op("relu", lambda p: ad.tsum(ad.relu(p)), r(20) + 0.05))
    results.append(check_op("prelu",
                            lambda p: ad.tsum(ad.prelu(p, Tensor(0.3))), r(20) + 0.05))
    results.append(check_op("sigmoid", lambda p: ad.tsum(ad.sigmoid(p)), r(12)))
    results.append(check_op("exp", lambda p: ad.tsum(ad.exp(p)), r(9)))
    results.append(check_op("log", lambda p: ad.tsum(ad.log(p)), r(9) ** 2 + 0.5))
    results.append(check_op("sqrt", lambda p: ad.tsum(ad.sqrt(p)), r(9) ** 2 + 0.5))
    results.append(check_op("square", lambda p: ad.tsum(ad.square(p)), r(9)))
    results.append(check_op("mean_axis",
                            lambda p: ad.tsum(ad.square(ad.mean(p, axis=1))), r((3, 5))))
    results.append(check_op("sum_axis",
                            lambda p: ad.tsum(ad.square(ad.tsum(p, axis=0))), r((3, 5))))
    results.append(check_op("reshape",
                            lambda p: ad.tsum(ad.square(ad.reshape(p, (6, 2)))), r((3, 4))))
    results.append(check_op(
        "concat", lambda p: ad.tsum(ad.square(ad.concat([p, Tensor(a)], axis=1))),
        r((3, 2))))

    w = r((2, 3, 3, 3)) * 0.5
    bias = r(2)
    for stride in (1, 2):
        results.append(check_op(
            f"conv2d_s{stride}_input",
            lambda p, s=stride: ad.tsum(ad.square(
                ad.conv2d(p, Tensor(w), Tensor(bias), stride=s))),
            r((2, 3, 4, 4))))
        x_in = r((2, 3, 4, 4))
        results.append(check_op(
            f"conv2d_s{stride}_weight",
            lambda p, s=stride: ad.tsum(ad.square(
                ad.conv2d(Tensor(x_in), p, None, stride=s))),
            w.copy()))
    results.append(check_op(
        "pixel_shuffle",
        lambda p: ad.tsum(ad.square(ad.pixel_shuffle(p, 2))), r((2, 8, 3, 3))))

    # AF gate: gradient through pool, dense stack, sigmoid gate
    config = mdl.ModelConfig(H=8, W=8, C=3, C_mid=4, C_out=4, M=4)
    params = mdl.as_parameters(mdl.init_parameters(config, seed=seed))
    feat0 = r((2, 4, 3, 3))
    results.append(check_op(
        "af_gate",
        lambda p: ad.tsum(ad.square(mdl.af_gate(p, 5.0, params, "enc.af1"))),
        feat0))

    norm_sel = r((2, 5, 2))
    results.append(check_op(
        "normalize_power",
        lambda p: ad.tsum(ad.square(normalize_power_tensor(p, 1.0) * Tensor(norm_sel))),
        r((2, 5, 2))))

    # straight-through backward vs finite differences of the SOFT forward
    const = make_qam(4, 1.0)
    qcfg = QuantizerConfig(sigma_q=5.0)
    z0 = r((6, 2)) * 0.8
    direction = r((6, 2))

    def soft_loss(x):
        return float(np.sum(soft_quantize(x, const, qcfg).soft * direction))

    p = parameter(z0.copy())
    out = quantize_straight_through(p, const, qcfg)
    ad.tsum(out * Tensor(direction)).backward()
    numeric = numerical_grad(soft_loss, z0)
    err = _rel_err(p.grad, numeric)
    results.append(CheckResult("straight_through_soft_path", err, err < 1e-4))

    # soft-assignment weights node (feeds the KL regularizer)
    wsel = r((6, 4))

    def weight_loss_np(x):
        return float(np.sum(soft_quantize(x, const, qcfg).weights * wsel))

    p = parameter(z0.copy())
    ad.tsum(soft_assignment_node(p, const, qcfg) * Tensor(wsel)).backward()
    numeric = numerical_grad(weight_loss_np, z0)
    err = _rel_err(p.grad, numeric)
    results.append(CheckResult("soft_assignment_weights", err, err < 1e-4))

    return results


def format_report(results: list[CheckResult]) -> str:
    lines = []
    for res in results:
        status = "ok" if res.passed else "FAIL"
        lines.append(f"{res.name:32s} rel_err={res.max_rel_err:.3e}  {status}")
    n_bad = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_bad}/{len(results)} checks passed")
    return "\n".join(lines)
