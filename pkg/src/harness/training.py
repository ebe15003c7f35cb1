"""Experience collection and training of specialized models"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from ..models.domain import InsufficientData
from ..specialization.gaussian import FitConfig, GaussianModel, fit_all, save_models
from ..specialization.memory import load_episodes
from ..utils.logger import logger
from .config import HarnessConfig
from .marathon import MarathonRunner


@dataclass
class TrainingResult:
    """Fitted models, the task keys without enough successes and the files written"""
    models: Dict[str, GaussianModel] = field(default_factory=dict)
    insufficient: Dict[str, str] = field(default_factory=dict)
    paths: List[Path] = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"{len(self.models)} models, {len(self.insufficient)} task keys with insufficient data"]
        lines += [f"  model {key}: n={model.count}" for key, model in sorted(self.models.items())]
        lines += [f"  insufficient {key}: {reason}" for key, reason in sorted(self.insufficient.items())]
        return "\n".join(lines)


class ExperienceCollector:
    """Noisy projection runs of the heuristic reasoner on the pilot seeds.

    Each pilot seed is run ``collection_repeats`` times with different
    execution noise. Episodes are labelled as projected so they are kept
    apart from the benchmark runs.

    Args:
        config: Harness configuration
    """

    def __init__(self, config: HarnessConfig):
        if not config.pilot_seeds:
            raise InsufficientData("Experience collection needs at least one pilot seed")
        overlap = sorted(set(config.pilot_seeds) & set(config.seeds))
        if overlap:
            logger.warning(f"Pilot seeds {overlap} are also benchmark seeds")
        self.config = config
        self.runner = MarathonRunner(config, mode="heuristic")
        self.directory = Path(config.output_dir) / "experience"
        logger.info(
            f"ExperienceCollector initialized ({len(config.pilot_seeds)} pilot seeds x "
            f"{config.collection_repeats} repeats)"
        )

    def collect(self) -> List[Path]:
        """Run every pilot seed and repeat; returns the experience logs"""
        paths = []
        for seed in self.config.pilot_seeds:
            for repeat in range(self.config.collection_repeats):
                path = self.directory / f"collect-seed{seed}-r{repeat}.ndjson"
                # repeats shift the seed, so scene jitter and noise draws both change
                self.runner.run_seed(
                    seed + 1000 * repeat,
                    path,
                    collecting=True,
                    run_id=f"collect-seed{seed}-r{repeat}",
                )
                paths.append(path)
        logger.info(f"Collected experience into {len(paths)} logs under {self.directory}")
        return paths


def train(
    log_paths: Iterable[Union[str, Path]],
    models_dir: Union[str, Path],
    task_keys: Optional[Iterable[str]] = None,
    fit_config: Optional[FitConfig] = None
) -> TrainingResult:
    """Fit one model per task key from episodic logs and write the model files.

    Keys without enough successes are reported in the result, not raised.
    Model files already in ``models_dir`` are replaced.
    """
    episodes = load_episodes(log_paths)
    models, insufficient = fit_all(episodes, fit_config, task_keys)
    models_dir = Path(models_dir)
    if models_dir.is_dir():
        for stale in sorted(models_dir.glob("*.yaml")):
            stale.unlink()
    paths = save_models(models, models_dir) if models else []
    result = TrainingResult(models, insufficient, paths)
    logger.info(f"Training finished: {len(models)} models, {len(insufficient)} insufficient")
    return result
