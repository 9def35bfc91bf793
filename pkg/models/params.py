import hashlib
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from exceptions import ConfigurationError, NumericError


@dataclass
class ParamSet:
    """
    Named, shaped float64 parameter records for one or more networks.
    Record order is insertion order and is preserved by copies and checkpoints.
    """

    records: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    version: int = 0

    def add(self, name: str, values: np.ndarray) -> None:
        if name in self.records:
            raise ConfigurationError(f"Duplicate parameter record '{name}'", details={"record": name})
        array = np.array(values, dtype=np.float64)
        if array.ndim == 0 or any(dim <= 0 for dim in array.shape):
            raise ConfigurationError(f"Record '{name}' needs a positive shape", details={"shape": list(array.shape)})
        if not np.all(np.isfinite(array)):
            raise NumericError(f"Record '{name}' holds non-finite values", record=name)
        self.records[name] = array

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.records[name]
        except KeyError:
            raise ConfigurationError(f"Unknown parameter record '{name}'", details={"record": name}) from None

    def __contains__(self, name: object) -> bool:
        return name in self.records

    def __iter__(self) -> Iterator[str]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def items(self):
        return self.records.items()

    def names(self) -> List[str]:
        return list(self.records)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: values.shape for name, values in self.records.items()}

    def copy(self) -> "ParamSet":
        return ParamSet(OrderedDict((name, values.copy()) for name, values in self.records.items()), self.version)

    def zeros_like(self) -> "ParamSet":
        return ParamSet(OrderedDict((name, np.zeros_like(values)) for name, values in self.records.items()), self.version)

    def mirrors(self, other: "ParamSet") -> bool:
        """True when both sets hold the same record names with the same shapes, in order"""
        return list(self.shapes().items()) == list(other.shapes().items())

    def subset(self, prefix: str) -> "ParamSet":
        selected = OrderedDict(
            (name, values) for name, values in self.records.items() if name.startswith(prefix + ".")
        )
        return ParamSet(selected, self.version)

    def merged(self, other: "ParamSet") -> "ParamSet":
        result = self.copy()
        for name, values in other.items():
            result.add(name, values)
        return result

    def replace(self, other: "ParamSet") -> "ParamSet":
        """Return a copy with every record of `other` overwriting the record of the same name"""
        result = self.copy()
        for name, values in other.items():
            if name not in result.records or result.records[name].shape != values.shape:
                raise ConfigurationError(f"Record '{name}' does not match", details={"record": name})
            result.records[name] = values.copy()
        return result

    def validate(self) -> None:
        for name, values in self.records.items():
            if not np.all(np.isfinite(values)):
                raise NumericError(f"Record '{name}' holds non-finite values", record=name)

    def digest(self) -> str:
        """SHA-256 over the checkpoint encoding"""
        from storage import encode_params

        return hashlib.sha256(encode_params(self)).hexdigest()


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))
