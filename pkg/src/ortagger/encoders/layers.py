from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Parameter, Tensor, ops, scaled_uniform


class Module:
    """Parameter container.  Parameters are discovered from attributes in definition order."""

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Parameter]]:
        out: list[tuple[str, Parameter]] = []
        seen: set[int] = set()

        def visit(name: str, obj) -> None:
            if isinstance(obj, Parameter):
                if id(obj) not in seen:
                    seen.add(id(obj))
                    out.append((name, obj))
            elif isinstance(obj, Module):
                for key, val in vars(obj).items():
                    visit(f"{name}.{key}" if name else key, val)
            elif isinstance(obj, (list, tuple)):
                for i, val in enumerate(obj):
                    visit(f"{name}.{i}", val)

        visit(prefix, self)
        return out

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self) -> list[Parameter]:
        return [p for p in self.parameters() if not p.frozen]


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(scaled_uniform((d_in, d_out), rng), name="weight")
        self.bias = Parameter(np.zeros(d_out), name="bias") if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(d), name="gamma")
        self.beta = Parameter(np.zeros(d), name="beta")
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


# ---------------------------------------------------------------------------
# positional embeddings


class PositionError(ValueError):
    """A sequence exceeds the available positional embeddings."""


@dataclass
class PositionalEmbeddings(Module):
    matrix: Parameter  # (max_positions, d_model)
    source: str        # sinusoid | learned | external

    @property
    def frozen(self) -> bool:
        return self.matrix.frozen

    @property
    def max_positions(self) -> int:
        return self.matrix.shape[0]

    def lookup(self, n: int) -> Tensor:
        if n > self.max_positions:
            raise PositionError(f"sequence of length {n} exceeds {self.max_positions} positions")
        if self.frozen:
            return Tensor(self.matrix.data[:n])
        return self.matrix[:n]


def sinusoid_table(n: int, d: int) -> np.ndarray:
    """``PE[p, 2i] = sin(p / 10000^(2i/d))``, ``PE[p, 2i+1] = cos(...)``."""
    if d % 2:
        raise ValueError(f"sinusoidal embeddings need an even width, got {d}")
    pos = np.arange(n, dtype=np.float64)[:, None]
    rates = 10000.0 ** (-np.arange(0, d, 2, dtype=np.float64) / d)
    table = np.empty((n, d))
    table[:, 0::2] = np.sin(pos * rates)
    table[:, 1::2] = np.cos(pos * rates)
    return table


def sinusoidal_pe(n: int, d: int) -> PositionalEmbeddings:
    return PositionalEmbeddings(Parameter(sinusoid_table(n, d), name="pe", frozen=True), "sinusoid")


def learned_pe(n: int, d: int, rng: np.random.Generator) -> PositionalEmbeddings:
    return PositionalEmbeddings(Parameter(scaled_uniform((n, d), rng), name="pe"), "learned")


def external_pe(matrix: np.ndarray) -> PositionalEmbeddings:
    return PositionalEmbeddings(Parameter(matrix, name="pe", frozen=True), "external")
