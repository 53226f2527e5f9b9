#!/usr/bin/env python3
"""
简单的命令行启动脚本

用法: python run_atsm.py check-feller --config data/table2_prop.json
"""

import sys
from pathlib import Path

# 确保可以从仓库根目录导入 atsm
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from atsm.main import main  # noqa: E402

if __name__ == "__main__":
    main()
