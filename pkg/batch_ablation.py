"""
批量消融实验
对多个种子依次生成仿真数据,分别用完整模型与各消融变体重建并评估,汇总为一份JSON
"""

import sys
import time
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeoutError
from pathlib import Path
from statistics import mean
from typing import Dict, List, Optional

# 添加项目根目录到路径
sys.path.insert(0, str(Path(__file__).parent))

from src.formats.run_writer import write_json
from src.main import StreamReconstructor, evaluate_run, simulate_dataset
from src.model.config import RunConfig
from src.utils.logger import setup_logger

logger = setup_logger('batch_ablation')

# 变体名 -> 运行配置覆盖项
VARIANTS: Dict[str, Dict[str, object]] = {
    'full': {},
    'no_gating': {'gating': False},
    'no_long_term': {'long_term': False},
    'attention_memory': {'voxel_pruning': False},
    'concat': {'decoder_variant': 'concat'},
}


class BatchAblation:
    """批量消融 - 种子 × 变体"""

    def __init__(self, out_dir, seeds: List[int], frames: int = 30, traj: str = 'walk',
                 variants: Optional[List[str]] = None, timeout_seconds: int = 600,
                 base_config: Optional[RunConfig] = None):
        """
        初始化批量消融

        Args:
            out_dir: 输出根目录
            seeds: 场景种子列表
            frames: 每个数据集的帧数
            traj: 轨迹类型
            variants: 参与的变体名,默认全部
            timeout_seconds: 单个(种子, 变体)任务的超时时间(秒)
            base_config: 各变体共用的基础运行配置,默认取default_config.json
        """
        self.out_dir = Path(out_dir)
        self.seeds = seeds
        self.frames = frames
        self.traj = traj
        self.variants = variants or list(VARIANTS)
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown:
            raise ValueError(f"未知变体: {unknown}")
        self.timeout_seconds = timeout_seconds
        self.base_config = base_config or RunConfig.from_defaults()
        self.processed_count = 0
        self.failed_count = 0

    def run(self) -> dict:
        """
        执行全部任务并写出summary.json

        Returns:
            汇总字典: 变体名 -> 平均指标
        """
        start_time = time.time()
        reports: Dict[str, List[dict]] = {name: [] for name in self.variants}
        self.processed_count = 0
        self.failed_count = 0

        for seed in self.seeds:
            data_dir = self.out_dir / f'seed_{seed}' / 'data'
            model = self.base_config.model
            simulate_dataset(seed, self.frames, self.traj, data_dir, model.image_h, model.image_w)

            for name in self.variants:
                logger.info(f"处理 seed={seed}, 变体={name}")
                logger.info(f"进度: 成功 {self.processed_count}, 失败 {self.failed_count}")
                # 每个任务单独一个执行器,超时后不阻塞后续任务
                executor = ThreadPoolExecutor(max_workers=1)
                future = executor.submit(self._run_variant, seed, name, data_dir)
                try:
                    reports[name].append(future.result(timeout=self.timeout_seconds))
                    self.processed_count += 1
                    logger.info(f"  [✓] 成功处理 ({time.time() - start_time:.1f}s)")
                except FutureTimeoutError:
                    self.failed_count += 1
                    logger.error(f"  [✗] 处理超时(>{self.timeout_seconds}秒),跳过")
                    future.cancel()
                except Exception as e:
                    self.failed_count += 1
                    logger.error(f"  [✗] 处理异常: {e}")
                    import traceback
                    traceback.print_exc()
                finally:
                    executor.shutdown(wait=False)

        summary = {name: summarize(items) for name, items in reports.items()}
        write_json({'seeds': self.seeds, 'frames': self.frames, 'trajectory': self.traj,
                    'variants': summary}, self.out_dir / 'summary.json')

        elapsed_time = time.time() - start_time
        logger.info("=" * 60)
        logger.info("[SUCCESS] 批量消融完成!")
        logger.info(f"输出目录: {self.out_dir}")
        logger.info(f"成功处理: {self.processed_count}")
        logger.info(f"处理失败: {self.failed_count}")
        logger.info(f"总耗时: {elapsed_time:.1f}秒")
        for name, item in summary.items():
            logger.info(f"  {name}: {item}")
        logger.info("=" * 60)
        return summary

    def _run_variant(self, seed: int, name: str, data_dir: Path) -> dict:
        """在独立线程中完成一次重建与评估"""
        run_config = self.base_config.with_overrides(VARIANTS[name])
        run_dir = self.out_dir / f'seed_{seed}' / name
        results = StreamReconstructor(run_config).reconstruct(data_dir, run_dir)
        report = evaluate_run(run_dir, data_dir, run_dir / 'report.json')

        gated = [r.stats.gated_fraction for r in results if r.stats.snapshot_size > 0]
        report['gated_fraction'] = mean(gated) if gated else 1.0
        report['ms_per_frame'] = mean(r.stats.ms_per_frame for r in results)
        return report


def summarize(reports: List[dict]) -> Optional[dict]:
    """对同一变体的多次报告逐项取平均;没有成功报告时为None"""
    if not reports:
        return None
    summary = {'runs': len(reports)}
    for key in reports[0]['recon']:
        summary[key] = mean(r['recon'][key] for r in reports)
    poses = [r['pose'] for r in reports if r['pose'] is not None]
    if poses:
        for key in poses[0]:
            summary[key] = mean(p[key] for p in poses)
    summary['gated_fraction'] = mean(r['gated_fraction'] for r in reports)
    summary['ms_per_frame'] = mean(r['ms_per_frame'] for r in reports)
    return summary


def main():
    """主函数"""
    import argparse

    parser = argparse.ArgumentParser(
        description='流式重建批量消融',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  python batch_ablation.py --out ablation                     # 种子0-2,全部变体
  python batch_ablation.py --out ablation --seeds 0 1 -f 60   # 指定种子与帧数
  python batch_ablation.py --out ablation --variants full no_gating
        """
    )
    parser.add_argument('--out', required=True, help='输出根目录')
    parser.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2], help='场景种子(默认0 1 2)')
    parser.add_argument('-f', '--frames', type=int, default=30, help='每个数据集的帧数(默认30)')
    parser.add_argument('--traj', choices=('orbit', 'walk'), default='walk')
    parser.add_argument('--variants', nargs='+', choices=list(VARIANTS), default=None)
    parser.add_argument('-t', '--timeout', type=int, default=600, help='单个任务超时时间(秒,默认600)')
    args = parser.parse_args()

    print("=" * 60)
    print("流式重建批量消融")
    print("=" * 60)
    print(f"种子: {args.seeds}, 帧数: {args.frames}, 轨迹: {args.traj}")
    print("=" * 60)

    ablation = BatchAblation(args.out, args.seeds, args.frames, args.traj, args.variants, args.timeout)
    try:
        ablation.run()
    except KeyboardInterrupt:
        print("\n\n用户中断")
        sys.exit(1)
    except Exception as e:
        print(f"\n错误:{e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
