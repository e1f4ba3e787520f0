"""
统一异常定义

流水线各模块抛出的领域异常。数值/格式类错误同时继承 ValueError，
方便调用方按标准异常捕获。
"""


class IdlingLabError(Exception):
    """所有领域异常的基类"""


class FormatError(IdlingLabError, ValueError):
    """文件格式错误（魔数、头部、记录格式）"""


class TruncationError(FormatError):
    """载荷长度与头部声明的尺寸/帧数不一致"""


class DataError(IdlingLabError, ValueError):
    """数据内容非法（非有限值、温度超出合理范围）"""


class GeometryError(IdlingLabError, ValueError):
    """几何错误：框与图像无交集、退化框等"""


class DomainError(IdlingLabError, ValueError):
    """未知的区域 / 引擎状态等枚举取值"""


class RecordValidationError(IdlingLabError, ValueError):
    """外部记录字段取值越界（如检测分数不在 [0,1]）"""


class SpecError(IdlingLabError, ValueError):
    """模型结构描述不一致（形状无法串联、输入形状不匹配）"""


class UsageError(IdlingLabError, RuntimeError):
    """调用方式错误（缺少缓存、空数据集、折数缺失等）"""


class TrainingError(IdlingLabError, RuntimeError):
    """训练无法进行（例如训练集只有一个类别）"""


class UndefinedAPError(IdlingLabError, ValueError):
    """没有正样本时 AP 无定义"""


class SequenceTooShortError(IdlingLabError, ValueError):
    """序列短于窗口长度"""


class ContainerIOError(IdlingLabError, OSError):
    """读写容器文件失败，消息中带有路径"""

    def __init__(self, path, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")
