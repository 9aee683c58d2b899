"""
流式三维重建主程序
子命令: simulate(生成仿真数据集) / run(流式重建) / eval(评估)
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from src.engine.stream_engine import StreamEngine
from src.formats.run_writer import DatasetReader, DatasetWriter, RunReader, RunWriter, write_json
from src.metrics.pose_metrics import extract_pose, trajectory_errors, trajectory_from_poses
from src.metrics.recon_metrics import evaluate_reconstruction
from src.model.config import RunConfig
from src.simulator.renderer import render_frame
from src.simulator.scene import SceneSpec, make_scene
from src.simulator.trajectory import TRAJECTORY_KINDS, make_trajectory
from src.utils.camera import Intrinsics, Trajectory
from src.utils.config_loader import config
from src.utils.errors import InvalidConfigError, ReconError
from src.utils.logger import set_verbosity, setup_logger

logger = setup_logger(__name__)


def simulate_dataset(seed: int, frames: int, traj_kind: str, out_dir, height: Optional[int] = None,
                     width: Optional[int] = None) -> Path:
    """
    生成仿真数据集

    Args:
        seed: 场景与轨迹种子
        frames: 帧数
        traj_kind: 'orbit' | 'walk'
        out_dir: 输出目录
        height: 图像高,默认取model.image_h
        width: 图像宽,默认取model.image_w

    Returns:
        输出目录
    """
    height = height or config.get('model.image_h', 64)
    width = width or config.get('model.image_w', 64)

    logger.info("=" * 50)
    logger.info(f"生成仿真数据: seed={seed}, frames={frames}, traj={traj_kind}, {height}x{width}")
    logger.info("=" * 50)

    scene = make_scene(seed, SceneSpec.from_defaults())
    intrinsics = Intrinsics.from_fov(height, width, config.get('simulator.fov_deg', 70.0))
    trajectory = make_trajectory(scene, traj_kind, frames, seed, intrinsics)

    writer = DatasetWriter(out_dir)
    anchor = trajectory.pose(0)
    for i in range(len(trajectory)):
        truth = render_frame(scene, trajectory.pose(i), intrinsics, height, width, anchor)
        writer.add_frame(i + 1, truth)
        logger.debug(f"渲染第{i + 1}/{frames}帧, 无效像素{int((~truth.pm_cam.valid).sum())}个")

    manifest = scene.to_manifest()
    manifest.update({
        'frames': frames,
        'trajectory': traj_kind,
        'image_h': height,
        'image_w': width,
        'intrinsics': {'fx': intrinsics.fx, 'fy': intrinsics.fy, 'cx': intrinsics.cx, 'cy': intrinsics.cy},
    })
    writer.save(trajectory, manifest)
    return Path(out_dir)


class StreamReconstructor:
    """把数据集逐帧送入流式引擎并写出结果"""

    def __init__(self, run_config: Optional[RunConfig] = None):
        """
        初始化重建器

        Args:
            run_config: 运行配置,默认取default_config.json
        """
        self.run_config = run_config or RunConfig.from_defaults()

    def reconstruct(self, input_dir, out_dir) -> List:
        """
        执行重建

        Args:
            input_dir: 数据集目录
            out_dir: 输出目录

        Returns:
            FrameResult列表
        """
        reader = DatasetReader(input_dir)
        cfg = self.run_config

        logger.info("=" * 50)
        logger.info(f"开始流式重建: {reader.data_dir} ({len(reader)}帧)")
        logger.info("=" * 50)

        engine = StreamEngine(cfg)
        writer = RunWriter(out_dir, cfg.ply_max_points, cfg.trace_timing)
        results = []
        images = {}
        try:
            for frame_index, image in zip(reader.frame_indices(), reader.images()):
                images[frame_index] = image
                result = engine.ingest(image)
                if result is not None:
                    results.append(result)
            if engine.state.pending is not None:
                results.append(engine.finalize())

            # 引擎帧号从1连续计数,与文件帧号逐一对应
            file_indices = reader.frame_indices()
            for result in results:
                file_index = file_indices[result.frame_index - 1]
                result.frame_index = file_index
                writer.add_frame(result, images[file_index])
        finally:
            writer.trace.close()

        writer.save(self._extract_trajectory(reader, results))

        kept = [r.stats.gated_fraction for r in results if r.stats.snapshot_size > 0]
        if kept:
            logger.info(f"平均门控保留比例: {sum(kept) / len(kept):.4f}")
        logger.info("=" * 50)
        logger.info(f"重建完成! 输出: {out_dir}")
        logger.info("=" * 50)
        return results

    @staticmethod
    def _extract_trajectory(reader: DatasetReader, results):
        """用数据集的相机系点图求预测位姿;缺少相机系点图时不输出轨迹"""
        poses = []
        for result in results:
            cam = reader.camera_pointmap(result.frame_index)
            if cam is None:
                logger.warning(f"缺少第{result.frame_index}帧的相机系点图,不输出预测轨迹")
                return None
            poses.append(extract_pose(result.pointmap, cam))
        return trajectory_from_poses(poses) if poses else None


def evaluate_run(pred_dir, gt_dir, out_path) -> dict:
    """
    评估一次运行结果

    Args:
        pred_dir: run输出目录
        gt_dir: 数据集目录
        out_path: 报告JSON路径

    Returns:
        报告字典
    """
    logger.info("=" * 50)
    logger.info(f"开始评估: pred={pred_dir}, gt={gt_dir}")
    logger.info("=" * 50)

    run = RunReader(pred_dir)
    dataset = DatasetReader(gt_dir)
    indices = run.frame_indices()
    pred_pms = run.pointmaps()
    gt_pms = []
    for index in indices:
        gt = dataset.world_pointmap(index)
        if gt is None:
            raise ReconError(f"数据集缺少第{index}帧的真值点图")
        gt_pms.append(gt)

    recon = evaluate_reconstruction(pred_pms, gt_pms,
                                    max_points=config.get('eval.max_points', 20000),
                                    workers=config.get('eval.workers', 4))

    pose = None
    pred_traj = run.trajectory()
    gt_traj = dataset.trajectory()
    if pred_traj is not None and gt_traj is not None and len(pred_traj) >= 2:
        positions = [i - 1 for i in indices]
        gt_sel = Trajectory(gt_traj.rotations[positions], gt_traj.translations[positions])
        pose = trajectory_errors(pred_traj, gt_sel).to_dict()
    else:
        logger.warning("缺少预测或真值轨迹,跳过位姿评估")

    report = {'frames': len(indices), 'recon': recon.to_dict(), 'pose': pose}
    write_json(report, out_path)
    logger.info(f"报告已保存: {out_path}")
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='reconstruct', description='流式三维重建')
    parser.add_argument('-v', '--verbose', action='store_true', help='输出DEBUG日志')
    sub = parser.add_subparsers(dest='command', required=True)

    p_sim = sub.add_parser('simulate', help='生成仿真数据集')
    p_sim.add_argument('--seed', type=int, required=True)
    p_sim.add_argument('--frames', type=int, required=True)
    p_sim.add_argument('--traj', choices=TRAJECTORY_KINDS, default='walk')
    p_sim.add_argument('--out', required=True)
    p_sim.add_argument('--height', type=int, default=None)
    p_sim.add_argument('--width', type=int, default=None)

    p_run = sub.add_parser('run', help='流式重建')
    p_run.add_argument('--config', default=None, help='行式 key = value 配置文件')
    p_run.add_argument('--input', required=True)
    p_run.add_argument('--out', required=True)

    p_eval = sub.add_parser('eval', help='评估重建结果')
    p_eval.add_argument('--pred', required=True)
    p_eval.add_argument('--gt', required=True)
    p_eval.add_argument('--out', required=True)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    命令行入口

    Returns:
        0 成功, 1 运行错误, 2 用法错误
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2

    set_verbosity(args.verbose)
    try:
        if args.command == 'simulate':
            if args.frames < 1:
                parser.print_usage(sys.stderr)
                logger.error(f"--frames必须至少为1: {args.frames}")
                return 2
            simulate_dataset(args.seed, args.frames, args.traj, args.out, args.height, args.width)
        elif args.command == 'run':
            run_config = RunConfig.from_file(args.config) if args.config else RunConfig.from_defaults()
            StreamReconstructor(run_config).reconstruct(args.input, args.out)
        elif args.command == 'eval':
            evaluate_run(args.pred, args.gt, args.out)
    except InvalidConfigError as e:
        logger.error(f"配置错误: {e}")
        return 2
    except (ReconError, OSError) as e:
        logger.error(f"执行失败: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
