# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Non-public implementation details for internal acon use.

The names defined here are not part of the public API, and subject to change.
"""
from typing import TYPE_CHECKING, Mapping, TypeVar
from abc import ABC, abstractmethod

__all__ = ["BoundedCache", "check_phase_index"]


if TYPE_CHECKING:
    from typing import Any, ClassVar, Iterator, NoReturn, Optional

    class _Dict:
        """Dict, but ignored by mypy."""

        # The cache keeps native dict lookups, so it has to inherit from
        # dict. Most dict methods are invalid on it though, and mypy should
        # know that: to the type checker it is only a Mapping.


else:
    _Dict = dict


K = TypeVar("K")
V = TypeVar("V")


class BoundedCache(_Dict, Mapping[K, V], ABC):
    """
    A mapping that computes missing values on lookup.

    Subclasses implement `value_for`, and may set `maxsize`. Once
    ``maxsize`` entries are held, computing a new one evicts the oldest.
    Entries can't be assigned, updated or removed by hand; keys are
    immutable, so an entry that is still cached is still valid.
    """

    __slots__ = ()

    #: Most entries kept at once; None for no limit.
    maxsize: "ClassVar[Optional[int]]" = None

    @abstractmethod
    def value_for(self, key: "K") -> "V":
        ...

    def __missing__(self, key: "K") -> "V":
        value = self.value_for(key)
        if self.maxsize is not None:
            while len(self) >= self.maxsize:
                dict.pop(self, next(iter(self)), None)  # type: ignore
        dict.__setitem__(self, key, value)  # type: ignore
        return value

    def __setitem__(self, key: "K", value: "V") -> "NoReturn":
        raise TypeError(
            f"{self.__class__.__name__} computes its own values; item "
            f"assignment is not supported."
        )

    def update(  # type: ignore
        self, *args: "Any", **kwargs: "Any"
    ) -> "NoReturn":
        raise TypeError(
            f"{self.__class__.__name__} does not support .update()."
        )

    def __delitem__(self, key: "K") -> "NoReturn":
        raise TypeError(
            f"{self.__class__.__name__} does not support key removal."
        )

    def pop(self, key: "K", default: "Any" = None) -> "NoReturn":
        raise TypeError(f"{self.__class__.__name__} does not support .pop().")

    if TYPE_CHECKING:

        def __getitem__(self, item: "K") -> "V":
            ...

        def __iter__(self) -> "Iterator[K]":
            ...

        def __len__(self) -> "int":
            ...


def check_phase_index(i: "int") -> "int":
    """Return the 0-based offset of phase ``i``, which must be 1 or 2."""
    if i not in (1, 2):
        raise ValueError(f"Phase index must be 1 or 2, got {i!r}.")
    return i - 1
