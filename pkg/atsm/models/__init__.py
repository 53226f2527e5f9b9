"""
领域数据模型、校验器与异常
"""
