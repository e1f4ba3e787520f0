"""
idling-lab 程序入口

    python src/main.py synth --out data
    python src/main.py eval --model svm --views rear
"""

import sys
from pathlib import Path

# 添加项目根目录到 Python 路径
sys.path.append(str(Path(__file__).parent.parent))

from src.cli.app import main


if __name__ == "__main__":
    main()
