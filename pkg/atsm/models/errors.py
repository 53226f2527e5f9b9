"""
ATSM工具包异常定义
"""

from typing import Any, Dict, List, Optional


class AtsmError(Exception):
    """所有工具包异常的基类"""


class ValidationError(AtsmError):
    """参数与模型类型不一致"""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        self.errors = list(errors or [])
        if self.errors:
            message = f"{message}: " + "; ".join(self.errors)
        super().__init__(message)


class ConfigError(ValidationError):
    """配置文件解析或约束失败"""

    def __init__(self, message: str, field_path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None,
                 errors: Optional[List[str]] = None):
        self.field_path = field_path
        self.line = line
        self.column = column
        location = []
        if field_path:
            location.append(f"字段 {field_path}")
        if line is not None:
            location.append(f"第{line}行第{column}列")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message, errors)


class PanelFormatError(ValidationError):
    """面板CSV格式错误"""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"{message} (第{row}行)"
        super().__init__(message)


class StructuralError(AtsmError):
    """模型类型与参数结构冲突，Feller条件无法求值"""


class SingularDriftError(AtsmError):
    """漂移矩阵 â 奇异"""


class NonStationaryError(AtsmError):
    """(I+â) 的谱半径不小于1"""


class MaturityRangeError(AtsmError):
    """期限超出系数表或模拟区间"""


class FilterDivergenceError(AtsmError):
    """滤波似然出现非有限值"""

    def __init__(self, message: str, quarter: int):
        self.quarter = quarter
        super().__init__(f"{message} (季度索引 {quarter})")


class EstimationError(AtsmError):
    """优化器在重启预算内未收敛"""

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        self.report = dict(report or {})
        super().__init__(message)
