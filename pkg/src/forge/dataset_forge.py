"""Dataset forge: one object owning a dataset root and its manifests."""

from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from ..models.compression import TrainingRecipe, get_recipe
from ..models.dataset import DatasetManifest
from ..models.experiment_config import DatasetSection
from ..utils.error_handler import MissingArtifactError
from ..utils.logging_config import get_logger
from .composites import TEST_MANIFEST_NAME, build_test_suite
from .corpus import SOURCE_MANIFEST_NAME, ingest_corpus
from .training_set import build_training_set, training_manifest_name


class DatasetForge:
    """
    Builds and locates the datasets of one experiment.

    Layout under `root`::

        manifest_source.json     sources/<role>/<id>.png
        manifest_<recipe>.json   <recipe>/<role>/<id>.jpg
        manifest_test.json       test/<source>/q<left>_<variant>.{png,jpg}
    """

    def __init__(self, root: Union[str, Path], seed: int, workers: int = 1, show_progress: bool = False):
        self.root = Path(root)
        self.seed = seed
        self.workers = workers
        self.show_progress = show_progress
        self.logger = get_logger(__name__)

    def ingest(
        self,
        corpus_dir: Union[str, Path],
        split_sizes: Tuple[int, int, int],
        train_size: Tuple[int, int],
        test_size: Tuple[int, int]
    ) -> DatasetManifest:
        return ingest_corpus(corpus_dir, split_sizes, self.seed, self.root,
                             train_size=train_size, test_size=test_size,
                             workers=self.workers, show_progress=self.show_progress)

    def build_training_set(self, recipe: Union[str, TrainingRecipe]) -> DatasetManifest:
        recipe = get_recipe(recipe) if isinstance(recipe, str) else recipe
        return build_training_set(self.source_manifest(), recipe, self.seed, self.root,
                                  workers=self.workers, show_progress=self.show_progress)

    def build_test_suite(self) -> DatasetManifest:
        return build_test_suite(self.source_manifest(), self.root,
                                workers=self.workers, show_progress=self.show_progress)

    def build_all(self, section: DatasetSection) -> Dict[str, DatasetManifest]:
        """Ingest, every configured recipe, then the test suite."""
        if not section.corpus:
            raise MissingArtifactError('dataset', "set dataset.corpus or pass --corpus")
        manifests = {'sources': self.ingest(
            section.corpus,
            (section.train, section.val, section.test),
            (section.train_size, section.train_size),
            (section.test_size, section.test_size),
        )}
        for name in section.recipes:
            manifests[name] = self.build_training_set(name)
        manifests['test'] = self.build_test_suite()
        return manifests

    def _load(self, name: str, what: str) -> DatasetManifest:
        path = self.root / name
        if not path.is_file():
            raise MissingArtifactError('dataset', f"no {what} manifest at {path}")
        return DatasetManifest.load(path)

    def source_manifest(self) -> DatasetManifest:
        return self._load(SOURCE_MANIFEST_NAME, "source")

    def training_manifest(self, recipe: Union[str, TrainingRecipe]) -> DatasetManifest:
        recipe = get_recipe(recipe) if isinstance(recipe, str) else recipe
        return self._load(training_manifest_name(recipe), f"{recipe.name} training")

    def test_manifest(self) -> DatasetManifest:
        return self._load(TEST_MANIFEST_NAME, "test-suite")

    def manifest_paths(self, recipes: Optional[List[str]] = None) -> List[Path]:
        names = [SOURCE_MANIFEST_NAME, TEST_MANIFEST_NAME]
        names += [training_manifest_name(get_recipe(r)) for r in (recipes or [])]
        return [self.root / n for n in names]
