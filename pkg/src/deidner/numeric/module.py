from __future__ import annotations

from typing import Iterator

import numpy as np

from .rng import SeededRng
from .tensor import Parameter

INIT_SCALE = 0.1


class Module:
    """Container whose Parameters (and sub-modules) are discovered by attribute order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Parameter):
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def uniform_param(rng: SeededRng, shape, name: str = "", scale: float = INIT_SCALE) -> Parameter:
    return Parameter(rng.uniform(-scale, scale, shape), name=name)


def zeros_param(shape, name: str = "") -> Parameter:
    return Parameter(np.zeros(shape), name=name)
