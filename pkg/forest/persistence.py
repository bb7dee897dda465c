"""
JSON persistence for fitted forests

The document is versioned and written with sorted keys and no timestamps,
so saving the same forest twice yields identical bytes.
"""
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from input_parsers.errors import ConfigurationError, DatasetParseError

from .controls import ForestControls
from .forest import WeightedForest
from .tree import WeightedTree

logger = logging.getLogger(__name__)

FORMAT_NAME = 'local-forest'
FORMAT_VERSION = 1


def _floats(values) -> list:
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(values, dtype=np.float64)]


def _ints(values) -> list:
    return [int(v) for v in np.asarray(values)]


class ForestJsonStore:
    """Reads and writes the forest JSON document"""

    def __init__(self, indent: int = None):
        self.indent = indent

    def tree_to_dict(self, tree: WeightedTree) -> dict:
        leaves = [
            {'node': int(node), 'rows': _ints(tree.leaf_rows[node]), 'weights': _floats(tree.leaf_weights[node])}
            for node in sorted(tree.leaf_rows)
        ]
        return {
            'randomization_seed': int(tree.randomization_seed),
            'resample_indices': _ints(tree.resample_indices),
            'feature': _ints(tree.feature),
            'threshold': _floats(tree.threshold),
            'left': _ints(tree.left),
            'right': _ints(tree.right),
            'value': _floats(tree.value),
            'depth': _ints(tree.depth) if tree.depth is not None else None,
            'fallback_nodes': int(tree.fallback_nodes),
            'leaves': leaves,
        }

    def tree_from_dict(self, data: dict) -> WeightedTree:
        threshold = np.array([np.nan if v is None else v for v in data['threshold']], dtype=np.float64)
        return WeightedTree(
            feature=np.asarray(data['feature'], dtype=np.intp),
            threshold=threshold,
            left=np.asarray(data['left'], dtype=np.intp),
            right=np.asarray(data['right'], dtype=np.intp),
            value=np.asarray(data['value'], dtype=np.float64),
            leaf_rows={leaf['node']: np.asarray(leaf['rows'], dtype=np.intp) for leaf in data['leaves']},
            leaf_weights={leaf['node']: np.asarray(leaf['weights'], dtype=np.float64) for leaf in data['leaves']},
            resample_indices=np.asarray(data['resample_indices'], dtype=np.intp),
            randomization_seed=int(data['randomization_seed']),
            fallback_nodes=int(data.get('fallback_nodes', 0)),
            depth=np.asarray(data['depth'], dtype=np.intp) if data.get('depth') is not None else None,
        )

    def to_document(self, forest: WeightedForest) -> dict:
        return {
            'format': FORMAT_NAME,
            'format_version': FORMAT_VERSION,
            'controls': forest.controls.to_dict(),
            'feature_names': list(forest.feature_names),
            'response': _floats(forest.response),
            'training_weights': _floats(forest.training_weights),
            'trees': [self.tree_to_dict(tree) for tree in forest.trees],
        }

    def from_document(self, document: dict) -> WeightedForest:
        if document.get('format') != FORMAT_NAME:
            raise DatasetParseError(f"not a {FORMAT_NAME} model document")
        version = document.get('format_version')
        if version != FORMAT_VERSION:
            raise ConfigurationError(
                f"unsupported model format_version {version}; this build reads version {FORMAT_VERSION}"
            )
        return WeightedForest(
            trees=[self.tree_from_dict(t) for t in document['trees']],
            controls=ForestControls.from_dict(document['controls']),
            response=np.asarray(document['response'], dtype=np.float64),
            training_weights=np.asarray(document['training_weights'], dtype=np.float64),
            feature_names=list(document['feature_names']),
        )

    def save(self, forest: WeightedForest, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.to_document(forest), sort_keys=True, indent=self.indent,
                          separators=(',', ':') if self.indent is None else (',', ': '),
                          allow_nan=False)
        path.write_text(text + '\n', encoding='utf-8')
        logger.info("Saved forest (%d trees) to %s", forest.n_trees, path)
        return path

    def load(self, path: Union[str, Path]) -> WeightedForest:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"File not found: {path}")
        try:
            document = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise DatasetParseError(f"malformed model file {path.name}: {e}") from e
        try:
            return self.from_document(document)
        except (KeyError, TypeError) as e:
            raise DatasetParseError(f"model file {path.name} is missing field {e}") from e


def save_forest(forest: WeightedForest, path: Union[str, Path]) -> Path:
    return ForestJsonStore().save(forest, path)


def load_forest(path: Union[str, Path]) -> WeightedForest:
    return ForestJsonStore().load(path)
