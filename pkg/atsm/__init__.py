"""
两因子离散时间仿射利率期限结构模型工具包
"""

__version__ = "1.0.0"
__author__ = "ATSM工具包开发团队"
