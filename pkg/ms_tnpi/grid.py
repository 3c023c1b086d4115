"""
Columns of the two-dimensional network: one column per time point, one row per site.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .constants import ColumnRole, IndexKind
from .exceptions import StructuralError
from .mp import MatrixProductOperator
from .tensor import Index, Tensor, attach_unit_index, sum_over, unit_index


@dataclass(frozen=True)
class GridColumn:
    """
    Tensors of all sites at one time point.

    ``temporal_in[i]`` joins row ``i`` to the previous time point and ``temporal_out[i]``
    to the next one. The first column has no incoming bonds, the last column has no
    outgoing bonds and no spatial bonds. ``site_indices`` stay open so influence
    functional factors can be attached to them.
    """

    point: int
    role: ColumnRole
    tensors: tuple[Tensor, ...]
    site_indices: tuple[Index, ...]
    spatial_bonds: tuple[Index, ...] = ()
    temporal_in: Optional[tuple[Index, ...]] = None
    temporal_out: Optional[tuple[Index, ...]] = None

    @property
    def P(self) -> int:
        return len(self.tensors)

    def replace(self, **changes) -> GridColumn:
        return dataclasses.replace(self, **changes)

    def to_mpo(self) -> MatrixProductOperator:
        """
        Column as an operator on the frontier of the contracted network: the first column
        maps site indices to outgoing bonds, intermediate columns (site indices summed)
        map incoming to outgoing bonds and the last column maps incoming bonds to sites.
        """
        if self.role is ColumnRole.INITIAL:
            if self.temporal_out is None:
                raise StructuralError(f"Initial column {self.point} has no outgoing bonds")
            return MatrixProductOperator(
                self.tensors, self.site_indices, self.temporal_out, self.spatial_bonds
            )

        if self.temporal_in is None:
            raise StructuralError(f"Column {self.point} has no incoming bonds")

        if self.role is ColumnRole.INTERMEDIATE:
            if self.temporal_out is None:
                raise StructuralError(f"Column {self.point} has no outgoing bonds")
            tensors = [sum_over(t, site) for t, site in zip(self.tensors, self.site_indices)]
            return MatrixProductOperator(
                tensors, self.temporal_in, self.temporal_out, self.spatial_bonds
            )

        bonds = [unit_index(IndexKind.SPATIAL_BOND, ("i", i)) for i in range(self.P - 1)]
        tensors = []
        for position, tensor in enumerate(self.tensors):
            if position > 0:
                tensor = attach_unit_index(tensor, bonds[position - 1])
            if position < len(bonds):
                tensor = attach_unit_index(tensor, bonds[position])
            tensors.append(tensor)
        return MatrixProductOperator(tensors, self.temporal_in, self.site_indices, bonds)
