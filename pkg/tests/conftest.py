from pathlib import Path

import numpy as np
import pytest

from specter_semcom.corpus_ingest import load_corpus, load_scene
from specter_semcom.embedding import write_embedding_file

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def ski_scene():
    return load_scene((FIXTURES / "ski_scene.json").read_bytes())


@pytest.fixture
def corpus_dir():
    return FIXTURES / "corpus"


@pytest.fixture
def corpus_scenes(corpus_dir):
    return load_corpus(corpus_dir)


@pytest.fixture
def ski_embeddings(tmp_path):
    """Vectors where 'pole in hand' lies mostly along 'man holding pole'."""
    e = np.eye(4)
    path = tmp_path / "ski.semb"
    write_embedding_file(
        path,
        {
            "man riding ski": e[0],
            "man holding pole": e[1],
            "pole in hand": e[1] + 0.3 * e[2],
            "man has head": e[3],
            "man has hand": e[0] + e[3],
        },
    )
    return path
