import io
import json
import logging
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, List, NamedTuple, Optional, Tuple

import requests

from molecular_graph import AtomVocabulary, MolecularGraph, check_valence, graph_to_record
from pipeline_errors import InputDomainError
from smiles_parser import parse_smiles

logger = logging.getLogger(__name__)


class DataCollector(ABC):
    """Abstract base class for data collectors."""

    @abstractmethod
    def collect(self, source: str) -> BinaryIO:
        """
        Collect raw ``.smi`` bytes from a source.

        Args:
            source: Path or URL to collect from.

        Returns:
            Binary IO object containing the collected data.
        """
        pass


class FileDataCollector(DataCollector):
    """Data collector that reads a local file."""

    def collect(self, source: str) -> BinaryIO:
        if not os.path.exists(source):
            logger.error(f"Source file not found: {source}")
            raise InputDomainError(f"source file not found: {source}")
        with open(source, "rb") as handle:
            return io.BytesIO(handle.read())


class HttpDataCollector(DataCollector):
    """Data collector that uses HTTP requests."""

    def collect(self, source: str) -> BinaryIO:
        """
        Download data from the given URL.

        Raises:
            requests.HTTPError: If the HTTP request fails.
        """
        logger.info(f"Downloading data from: {source}")
        response = requests.get(source)
        if response.status_code == 200:
            return io.BytesIO(response.content)
        logger.error(f"Failed to download file from {source}. Status code: {response.status_code}")
        response.raise_for_status()
        raise InputDomainError(f"download of {source} returned status {response.status_code}")


def collector_for(source: str) -> DataCollector:
    if source.startswith(("http://", "https://")):
        return HttpDataCollector()
    return FileDataCollector()


class DataStorage(ABC):
    """Abstract base class for dataset storage."""

    @abstractmethod
    def store(self, records: Iterable[dict], destination: str) -> int:
        """
        Store records at the destination.

        Returns:
            Number of records written.
        """
        pass


class JsonlDataStorage(DataStorage):
    """Writes one JSON object per line."""

    def store(self, records: Iterable[dict], destination: str) -> int:
        directory = os.path.dirname(destination)
        if directory:
            os.makedirs(directory, exist_ok=True)
        count = 0
        try:
            with open(destination, "w", encoding="utf-8") as handle:
                for record in records:
                    handle.write(json.dumps(record) + "\n")
                    count += 1
        except OSError as e:
            logger.error(f"Failed to write {destination}: {e}")
            raise
        logger.info(f"Successfully wrote {count} records to {destination}")
        return count


def heteroatom_property(g: MolecularGraph, vocab: AtomVocabulary) -> float:
    """Ten times the fraction of heavy atoms that are not carbon, rounded to 6 decimals."""
    symbols = [vocab.symbol(int(a)) for a in g.atom_types]
    heavy = [s for s in symbols if s != "H"]
    if not heavy:
        return 0.0
    hetero = sum(1 for s in heavy if s != "C")
    return round(10.0 * hetero / len(heavy), 6)


class RejectedLine(NamedTuple):
    line_number: int
    stage: str  # parse or valence
    reason: str
    text: str


@dataclass
class IngestReport:
    accepted: int
    rejected: List[RejectedLine] = field(default_factory=list)

    @property
    def rejected_count(self) -> int:
        return len(self.rejected)

    @property
    def parse_failures(self) -> int:
        return sum(1 for r in self.rejected if r.stage == "parse")

    @property
    def valence_failures(self) -> int:
        """Lines that parsed but failed the valence or connectivity check."""
        return sum(1 for r in self.rejected if r.stage == "valence")


class DatasetIngester:
    """
    Turns a ``.smi`` source into a JSON Lines graph dataset.

    Each line holds a SMILES string and an optional name. Lines that do
    not parse, and lines that parse but fail the valence check, go to a
    rejects file next to the output as
    ``line_number<TAB>stage<TAB>reason<TAB>text`` with stage ``parse`` or
    ``valence``.
    """

    def __init__(
        self,
        vocab: AtomVocabulary,
        property_source: str = "heteroatom_fraction",
        data_collector: Optional[DataCollector] = None,
        data_storage: Optional[DataStorage] = None,
    ):
        self.vocab = vocab
        self.property_source = property_source
        self.data_collector = data_collector
        self.data_storage = data_storage or JsonlDataStorage()

    @staticmethod
    def rejects_path(destination: str) -> str:
        root, _ = os.path.splitext(destination)
        return f"{root}.rejects.tsv"

    def parse_lines(self, lines: Iterable[str]) -> Tuple[List[MolecularGraph], List[RejectedLine]]:
        graphs, rejected = [], []
        for line_number, line in enumerate(lines, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            smiles = text.split()[0]
            try:
                g = parse_smiles(smiles, self.vocab)
            except InputDomainError as e:
                rejected.append(RejectedLine(line_number, "parse", str(e), text))
                continue
            if not check_valence(g, self.vocab):
                rejected.append(RejectedLine(line_number, "valence", "valence or connectivity check failed", text))
                continue
            if self.property_source == "heteroatom_fraction":
                g = g.with_property(heteroatom_property(g, self.vocab))
            graphs.append(g)
        return graphs, rejected

    def ingest(self, source: str, destination: str) -> IngestReport:
        collector = self.data_collector or collector_for(source)
        try:
            raw = collector.collect(source).read().decode("utf-8")
        except Exception as e:
            logger.error(f"Failed to collect {source}: {e}")
            raise
        graphs, rejected = self.parse_lines(raw.splitlines())
        accepted = self.data_storage.store((graph_to_record(g, self.vocab) for g in graphs), destination)
        with open(self.rejects_path(destination), "w", encoding="utf-8") as handle:
            for r in rejected:
                handle.write(f"{r.line_number}\t{r.stage}\t{r.reason}\t{r.text}\n")
        report = IngestReport(accepted, rejected)
        logger.info(
            f"Ingested {source}: {accepted} accepted, {report.parse_failures} unparseable, "
            f"{report.valence_failures} failed the valence check"
        )
        return report
