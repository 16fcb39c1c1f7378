#!/usr/bin/python3
# -----------------------------------------------------------
# Reverse-mode gradients and the finite-difference oracle
# -----------------------------------------------------------
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch

from app.exceptions import NonFiniteValue
from app.log import logger


def parameter_set(model):
    """
    ordered mapping name -> learnable tensor, in the stable order of `model.named_parameters()`
    """
    return OrderedDict(model.named_parameters())


def grad(loss_fn, params):
    """
    reverse-mode gradients of the scalar `loss_fn(params)` with respect to every tensor of `params`;
    tensors the loss does not use get exact zeros
    """
    names = list(params)
    tensors = [params[name] for name in names]
    loss = loss_fn(params)
    if not torch.isfinite(loss).all():
        raise NonFiniteValue("loss evaluation", f"loss = {loss.item()}")
    gradients = torch.autograd.grad(loss, tensors, allow_unused=True)
    result = OrderedDict()
    for name, tensor, gradient in zip(names, tensors, gradients):
        if gradient is None:
            gradient = torch.zeros_like(tensor)
        if not torch.isfinite(gradient).all():
            raise NonFiniteValue(f"backward pass of {name}")
        result[name] = gradient
    return result


@dataclass
class GradientReport:
    """
    comparison of analytic and central-difference gradients
    """
    max_relative_error: Dict[str, float] = field(default_factory=dict)
    max_absolute_error: Dict[str, float] = field(default_factory=dict)
    checked: Dict[str, int] = field(default_factory=dict)
    kinks: List[Tuple[str, int]] = field(default_factory=list)
    below_noise: List[Tuple[str, int]] = field(default_factory=list)
    worst_name: Optional[str] = None
    worst_index: Optional[int] = None
    worst_relative_error: float = 0.0
    failures: int = 0

    def passed(self):
        return self.failures == 0

    def to_dict(self):
        return {
            "passed": self.passed(),
            "worst_name": self.worst_name,
            "worst_index": self.worst_index,
            "worst_relative_error": self.worst_relative_error,
            "failures": self.failures,
            "kinks": [list(kink) for kink in self.kinks],
            "below_noise": len(self.below_noise),
            "checked": self.checked,
            "max_relative_error": self.max_relative_error,
            "max_absolute_error": self.max_absolute_error,
        }


def _coordinates(tensor, max_coords, rng):
    count = tensor.numel()
    if max_coords is None or count <= max_coords:
        return np.arange(count)
    return np.sort(rng.choice(count, size=max_coords, replace=False))


# pylint: disable=too-many-locals,too-many-arguments
def finite_diff_check(loss_fn, params, eps=1e-5, threshold=1e-4, max_coords=None, seed=0,
                      kink_tolerance=1e-3, abs_tolerance=1e-10):
    """
    compares grad(loss_fn, params) with central differences (f(p + ε) - f(p - ε)) / 2ε
    on every coordinate, or on `max_coords` random coordinates per tensor

    the relative error divides by max(|analytic|, |numeric|, 1e-8); a coordinate whose one-sided
    differences disagree by more than `kink_tolerance` (relative) sits on a kink: it is reported
    and left out of the pass/fail statistic. So is a coordinate whose absolute error is within
    `abs_tolerance`, the round-off floor of the differences. Any other coordinate fails when its
    relative error exceeds `threshold`.
    """
    analytic = grad(loss_fn, params)
    rng = np.random.default_rng(seed)
    report = GradientReport()

    def _evaluate():
        with torch.no_grad():
            return float(loss_fn(params))

    with torch.no_grad():
        base = _evaluate()
        for name, tensor in params.items():
            flat = tensor.view(-1)
            expected = analytic[name].reshape(-1)
            max_rel, max_abs = 0.0, 0.0
            coords = _coordinates(tensor, max_coords, rng)
            for index in coords:
                original = flat[index].item()
                flat[index] = original + eps
                plus = _evaluate()
                flat[index] = original - eps
                minus = _evaluate()
                flat[index] = original

                numeric = (plus - minus) / (2.0 * eps)
                forward, backward = (plus - base) / eps, (base - minus) / eps
                value = expected[index].item()
                abs_error = abs(value - numeric)
                denominator = max(abs(value), abs(numeric), 1e-8)
                rel_error = abs_error / denominator
                if abs(forward - backward) > kink_tolerance * max(abs(forward), abs(backward), 1e-8):
                    report.kinks.append((name, int(index)))
                    logger.debug("kink at %s[%s]: one-sided slopes %s / %s", name, index, forward, backward)
                    continue
                max_abs = max(max_abs, abs_error)
                if abs_error <= abs_tolerance:
                    report.below_noise.append((name, int(index)))
                    continue
                max_rel = max(max_rel, rel_error)
                if rel_error > threshold:
                    report.failures += 1
                if rel_error > report.worst_relative_error:
                    report.worst_relative_error = rel_error
                    report.worst_name, report.worst_index = name, int(index)
            report.max_relative_error[name] = max_rel
            report.max_absolute_error[name] = max_abs
            report.checked[name] = len(coords)
    return report
