"""
Shared fixtures: a hand-made toy corpus and the synthetic corpora
"""

import numpy as np
import pytest

from frameverify.app.annotate import FrameLexicon
from frameverify.app.corpus import AnnotatedClaim, AnnotatedDocument
from frameverify.app.embed import EmbeddingTable
from frameverify.app.synthetic import build_ablation_corpus, build_synthetic


def _doc(doc_id, sentences):
    return AnnotatedDocument.model_validate(
        {
            "doc_id": doc_id,
            "sentences": [
                {"index": i, "text": text, "frames": frames, "in_scope": in_scope}
                for i, (text, frames, in_scope) in enumerate(sentences)
            ],
        }
    )


@pytest.fixture
def toy_corpus():
    docs = [
        _doc(
            "Barack_Obama",
            [
                ("Barack Obama was born in Hawaii.", ["Being_born"], True),
                ("He served as president.", ["Leadership"], True),
                ("Obama was born on August 4.", ["Being_born", "Calendric_unit"], False),
            ],
        ),
        _doc(
            "Hawaii",
            [
                ("Hawaii is a state.", ["Political_locales"], True),
                ("Many people were born in Hawaii.", ["Being_born"], False),
            ],
        ),
        _doc("Paris_(city)", [("Paris is the capital of France.", ["Political_locales"], True)]),
    ]
    return {doc.doc_id: doc for doc in docs}


@pytest.fixture
def toy_claims():
    return [
        AnnotatedClaim(
            claim_id="c1",
            text="Barack Obama was born in Hawaii",
            frames={"Being_born"},
            entities={"Barack_Obama", "Hawaii"},
            label="SUPPORTS",
            evidence=[[("Barack_Obama", 0)]],
        ),
        AnnotatedClaim(
            claim_id="c2",
            text="Paris is a city",
            frames={"Political_locales"},
            entities={"Paris"},
            label="NOT ENOUGH INFO",
        ),
    ]


@pytest.fixture
def toy_lexicon():
    return FrameLexicon(
        entries={"born": ["Being_born"], "president": ["Leadership"], "state": ["Political_locales"]}
    )


@pytest.fixture
def toy_table():
    rng = np.random.default_rng(0)
    words = "barack obama was born in hawaii he served as president paris is a city".split()
    return EmbeddingTable.from_vectors({word: rng.normal(size=4) for word in words})


@pytest.fixture(scope="session")
def synthetic():
    return build_synthetic()


@pytest.fixture(scope="session")
def ablation_data():
    return build_ablation_corpus()
