"""
按车辆划分的交叉验证折

loco: 每辆车轮流作为验证集 V1，其余车辆训练。
ltco: 每辆车作为 V1，另外随机抽取一辆不同的车作为早停集 V2（带种子）。
"""

from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, model_validator

from ..errors import UsageError


class Fold(BaseModel):
    index: int
    train: List[str]
    v1: str
    v2: Optional[str] = None

    @model_validator(mode="after")
    def _disjoint(self) -> "Fold":
        held_out = {self.v1} | ({self.v2} if self.v2 else set())
        if self.v2 == self.v1 or held_out & set(self.train):
            raise ValueError(f"折 {self.index} 的训练 / V1 / V2 车辆有重叠")
        return self


class FoldPlan(BaseModel):
    strategy: str
    folds: List[Fold]
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _each_car_once(self) -> "FoldPlan":
        v1 = [fold.v1 for fold in self.folds]
        if len(v1) != len(set(v1)):
            raise ValueError("每辆车只能作为一次 V1")
        return self

    @property
    def car_ids(self) -> List[str]:
        return sorted({fold.v1 for fold in self.folds})

    def fold_for(self, car_id: str) -> Fold:
        for fold in self.folds:
            if fold.v1 == car_id:
                return fold
        raise UsageError(f"没有以 {car_id} 为验证集的折")


def _unique_sorted(car_ids: Sequence[str]) -> List[str]:
    cars = sorted(set(car_ids))
    if len(cars) != len(list(car_ids)):
        raise UsageError("车辆编号重复")
    return cars


def loco_folds(car_ids: Sequence[str]) -> FoldPlan:
    """留一车交叉验证"""
    cars = _unique_sorted(car_ids)
    if len(cars) < 2:
        raise UsageError(f"留一车交叉验证至少需要 2 辆车，得到 {len(cars)}")
    folds = [
        Fold(index=i, train=[c for c in cars if c != v1], v1=v1)
        for i, v1 in enumerate(cars)
    ]
    return FoldPlan(strategy="loco", folds=folds)


def ltco_folds(car_ids: Sequence[str], seed: int = 0) -> FoldPlan:
    """留二车交叉验证：V1 轮换，V2 从其余车辆中均匀抽取"""
    cars = _unique_sorted(car_ids)
    if len(cars) < 3:
        raise UsageError(f"留二车交叉验证至少需要 3 辆车，得到 {len(cars)}")
    rng = np.random.default_rng(seed)
    folds = []
    for i, v1 in enumerate(cars):
        others = [c for c in cars if c != v1]
        v2 = others[int(rng.integers(len(others)))]
        folds.append(Fold(index=i, train=[c for c in others if c != v2], v1=v1, v2=v2))
    return FoldPlan(strategy="ltco", folds=folds, seed=seed)
