"""
命令行子命令，每个模块一个子命令
"""
