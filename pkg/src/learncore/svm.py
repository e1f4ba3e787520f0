"""
RBF 核 SVM

对偶问题用 SMO 求解：每轮选取最大违反对 (i, j)，解析求解二变量子问题并裁剪到
[0, C]，梯度增量更新，直到最大违反量小于 tol。偏置按自由支持向量的 y*G 均值求得。
概率输出用 sigmoid 校准：在训练集决策值上以最大似然拟合 P(y=1|f) = 1 / (1 + exp(A f + B))。

标签约定：1（或 +1）为正类 idling，0（或 -1）为负类。
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.special import expit

from ..errors import TrainingError, UsageError

logger = logging.getLogger(__name__)

_TAU = 1e-12


class SvmConfig(BaseModel):
    """SVM 配置；gamma 为空时取 1 / (特征维数 * 特征方差)"""
    C: float = Field(default=0.5, gt=0.0)
    gamma: Optional[float] = Field(default=None, gt=0.0)
    tol: float = Field(default=1e-3, gt=0.0)
    max_iter: int = Field(default=100_000, gt=0, description="SMO 最大迭代次数")


@dataclass
class SvmModel:
    support_vectors: np.ndarray   # (S, D)
    dual_coef: np.ndarray         # (S,) alpha_i * y_i
    rho: float
    gamma: float
    prob_a: float
    prob_b: float
    alpha: np.ndarray             # 全部训练样本的 alpha
    y: np.ndarray                 # 全部训练样本的 ±1 标签
    iterations: int = 0

    @property
    def bias(self) -> float:
        return -self.rho


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """K(a, b) = exp(-gamma * |a - b|^2)"""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return np.exp(-gamma * cdist(a, b, "sqeuclidean"))


def default_gamma(features: np.ndarray) -> float:
    features = np.asarray(features, dtype=np.float64)
    var = float(features.var())
    if var <= 0.0:
        return 1.0
    return 1.0 / (features.shape[1] * var)


def _signed_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    values = set(np.unique(labels).tolist())
    if values <= {0, 1}:
        return np.where(labels == 1, 1.0, -1.0)
    if values <= {-1, 1}:
        return labels.astype(np.float64)
    raise UsageError(f"SVM 标签只能是 {{0,1}} 或 {{-1,+1}}，得到 {sorted(values)}")


def _violating_pair(alpha, y, grad, C) -> Tuple[int, int, float]:
    """返回 (i, j, m - M)；i 属于 I_up 使 -yG 最大，j 属于 I_low 使 -yG 最小"""
    score = -y * grad
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not up.any() or not low.any():
        return -1, -1, 0.0
    i = int(np.argmax(np.where(up, score, -np.inf)))
    j = int(np.argmin(np.where(low, score, np.inf)))
    return i, j, float(score[i] - score[j])


def kkt_violation(alpha: np.ndarray, y: np.ndarray, kernel: np.ndarray, C: float) -> float:
    """最大 KKT 违反量 m(alpha) - M(alpha)；不大于 tol 即满足 KKT 条件"""
    y = np.asarray(y, dtype=np.float64)
    Q = (y[:, None] * y[None, :]) * kernel
    grad = Q @ alpha - 1.0
    return max(_violating_pair(alpha, y, grad, C)[2], 0.0)


def _solve_dual(Q: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(Q)

    iterations = 0
    while iterations < max_iter:
        i, j, gap = _violating_pair(alpha, y, grad, C)
        if i < 0 or gap < tol:
            break
        iterations += 1
        old_i, old_j = alpha[i], alpha[j]

        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * Q[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Q[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > C:
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total

        grad += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
    else:
        logger.warning("SMO 达到最大迭代次数 %d，最大违反量仍为 %.2e", max_iter,
                       _violating_pair(alpha, y, grad, C)[2])

    return alpha, grad, iterations


def _rho(alpha, y, grad, C) -> float:
    yg = y * grad
    upper, lower = math.inf, -math.inf
    free = []
    for a, label, value in zip(alpha, y, yg):
        if a >= C:
            if label < 0:
                upper = min(upper, value)
            else:
                lower = max(lower, value)
        elif a <= 0:
            if label > 0:
                upper = min(upper, value)
            else:
                lower = max(lower, value)
        else:
            free.append(value)
    if free:
        return float(np.mean(free))
    return (upper + lower) / 2.0


def fit_sigmoid(decision: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """在决策值上拟合 (A, B)，目标概率带平滑：(N+ + 1)/(N+ + 2) 与 1/(N- + 2)"""
    decision = np.asarray(decision, dtype=np.float64)
    positives = int((y > 0).sum())
    negatives = len(y) - positives
    target = np.where(y > 0, (positives + 1.0) / (positives + 2.0), 1.0 / (negatives + 2.0))

    def objective(theta):
        z = theta[0] * decision + theta[1]
        # -log P = log(1 + e^z) - (1 - t) z
        loss = np.sum(np.logaddexp(0.0, z) - (1.0 - target) * z)
        diff = target - expit(-z)
        return loss, np.array([np.sum(diff * decision), np.sum(diff)])

    start = np.array([0.0, math.log((negatives + 1.0) / (positives + 1.0))])
    result = minimize(objective, start, jac=True, method="BFGS")
    if not result.success:
        logger.debug("sigmoid 校准未完全收敛: %s", result.message)
    return float(result.x[0]), float(result.x[1])


def svm_train(features: np.ndarray, labels: np.ndarray, cfg: Optional[SvmConfig] = None) -> SvmModel:
    """训练 SVM 并完成概率校准；训练集只有一个类别时抛出 TrainingError"""
    cfg = cfg or SvmConfig()
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise UsageError(f"SVM 特征必须是非空 (N, D) 数组，得到 {x.shape}")
    y = _signed_labels(labels)
    if len(y) != len(x):
        raise UsageError("特征与标签数量不一致")
    if (y > 0).all() or (y < 0).all():
        raise TrainingError("SVM 训练集只包含一个类别")

    gamma = cfg.gamma if cfg.gamma is not None else default_gamma(x)
    kernel = rbf_kernel(x, x, gamma)
    Q = (y[:, None] * y[None, :]) * kernel

    alpha, grad, iterations = _solve_dual(Q, y, cfg.C, cfg.tol, cfg.max_iter)
    rho = _rho(alpha, y, grad, cfg.C)

    support = alpha > 0
    decision = kernel[:, support] @ (alpha[support] * y[support]) - rho
    prob_a, prob_b = fit_sigmoid(decision, y)

    logger.debug("SMO: %d 次迭代，%d/%d 个支持向量，gamma=%.4g", iterations, int(support.sum()), len(y), gamma)
    return SvmModel(
        support_vectors=x[support],
        dual_coef=alpha[support] * y[support],
        rho=rho,
        gamma=gamma,
        prob_a=prob_a,
        prob_b=prob_b,
        alpha=alpha,
        y=y,
        iterations=iterations,
    )


def svm_decision_function(model: SvmModel, features: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    return rbf_kernel(x, model.support_vectors, model.gamma) @ model.dual_coef - model.rho


def svm_predict_proba(model: SvmModel, features: np.ndarray) -> np.ndarray:
    """正类（idling）概率；输入单个特征向量时返回长度为 1 的数组"""
    f = svm_decision_function(model, features)
    return expit(-(model.prob_a * f + model.prob_b))
