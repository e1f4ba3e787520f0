"""
Idling Lab - 基于长波红外图像序列的怠速车辆检测

流水线模块：
- irdata: 红外序列数据模型与 IRS 容器读写
- thermosim: 带标注的合成红外序列生成器
- detect: 高温区域车辆检测与外部检测导入
- track: IoU 跟踪与静止车辆提取
- learncore: 从零实现的反向传播、优化器与 SMO 支持向量机
- classify: 时间 / 时空窗口构造与五类分类器
- evalharness: 交叉验证、PR/AP 与端到端评估
- cli: 命令行编排
"""
