"""Episodic memory: the episodes of parameterized attempts, appended to NDJSON run logs"""

from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from ..models.domain import Episode, LogFormatError
from ..planlang.serialization import NdjsonWriter, iter_positioned
from ..utils.logger import logger


class EpisodicMemory:
    """Append-only store of episodes.

    Episodes go to the same writer the task tree recorder uses, so one run
    file holds tasks, events and episodes. Without a writer the memory is
    in-memory only.

    Args:
        writer: Run log receiving ``episode`` records
    """

    def __init__(self, writer: Optional[NdjsonWriter] = None):
        self.writer = writer
        self.episodes: List[Episode] = []

    @classmethod
    def open(cls, path: Union[str, Path], header: Optional[Dict[str, Any]] = None) -> "EpisodicMemory":
        return cls(NdjsonWriter(path, header))

    def __len__(self) -> int:
        return len(self.episodes)

    def log(self, episode: Episode) -> Dict[str, Any]:
        """Append one episode and return the record written"""
        if not isinstance(episode, Episode):
            raise TypeError(f"Expected an Episode, got {type(episode).__name__}")
        record = episode.to_record()
        if self.writer is not None:
            self.writer.write(record)
        self.episodes.append(episode)
        return record

    __call__ = log

    def extend(self, episodes: Iterable[Episode]) -> None:
        for episode in episodes:
            self.log(episode)

    def task_keys(self) -> List[str]:
        return sorted({e.task_key for e in self.episodes})

    def by_key(self) -> Dict[str, List[Episode]]:
        grouped: Dict[str, List[Episode]] = defaultdict(list)
        for episode in self.episodes:
            grouped[episode.task_key].append(episode)
        return dict(grouped)

    def close(self) -> None:
        if self.writer is not None:
            self.writer.close()


def read_episodes(source: Union[str, Path], sources: Optional[Iterable[str]] = None) -> List[Episode]:
    """Episodes of one run log.

    Args:
        source: Log file
        sources: Keep only these episode sources ("execution", "projection")

    Raises:
        LogFormatError: corrupt line, or an episode record that does not
            match the episode schema
    """
    keep = set(sources) if sources is not None else None
    episodes = []
    for number, offset, record in iter_positioned(source):
        if record["type"] != "episode":
            continue
        try:
            episode = Episode.from_record(record)
        except (KeyError, TypeError, ValueError) as exc:
            raise LogFormatError(f"Malformed episode: {exc}", number, offset) from exc
        if keep is None or episode.source in keep:
            episodes.append(episode)
    return episodes


def load_episodes(paths: Iterable[Union[str, Path]], sources: Optional[Iterable[str]] = None) -> List[Episode]:
    """Episodes of several run logs, in the order of the paths given"""
    episodes: List[Episode] = []
    for path in paths:
        found = read_episodes(path, sources)
        logger.debug(f"Read {len(found)} episodes from {path}")
        episodes += found
    logger.info(f"Loaded {len(episodes)} episodes")
    return episodes
