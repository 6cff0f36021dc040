"""Versioned on-disk container for trained models.

The artifact embeds the model spec, learned parameters, ordered feature
list, preprocessor state, and metadata, plus a content hash that is
verified on load. JSON float serialisation is exact, so a load/predict
round trip is bitwise identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import PersistenceError
from ..ioutil import sha256_text, write_text_atomic
from . import ModelSpec, build_model

FORMAT_NAME = "logqc-model"
FORMAT_VERSION = 1


@dataclass
class ModelArtifact:
    spec: ModelSpec
    feature_names: list[str]
    payload: dict
    preprocessor: dict | None = None
    metadata: dict = field(default_factory=dict)

    def body(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "feature_names": list(self.feature_names),
            "payload": self.payload,
            "preprocessor": self.preprocessor,
            "metadata": self.metadata,
        }

    def content_hash(self) -> str:
        return sha256_text(json.dumps(self.body(), sort_keys=True))

    def model(self):
        """Rebuild the trained classifier from the stored payload."""
        return build_model(self.spec).restore_payload(self.payload)

    def predict_proba(self, X):
        return self.model().predict_proba(X)


def fitted_artifact(spec: ModelSpec, model, feature_names, preprocessor=None, metadata=None) -> ModelArtifact:
    return ModelArtifact(
        spec=spec,
        feature_names=list(feature_names),
        payload=model.to_payload(),
        preprocessor=preprocessor,
        metadata=dict(metadata or {}),
    )


def save_artifact(artifact: ModelArtifact, path) -> str:
    """Write the artifact; returns its content hash."""
    digest = artifact.content_hash()
    document = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "sha256": digest,
        "artifact": artifact.body(),
    }
    write_text_atomic(path, json.dumps(document, sort_keys=True, indent=2) + "\n")
    return digest


def load_artifact(path) -> ModelArtifact:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"cannot read model file {path}: {exc}") from exc
    if document.get("format") != FORMAT_NAME:
        raise PersistenceError(f"{path} is not a {FORMAT_NAME} file")
    if document.get("version") != FORMAT_VERSION:
        raise PersistenceError(
            f"unsupported model file version {document.get('version')!r} (expected {FORMAT_VERSION})"
        )
    body = document.get("artifact", {})
    artifact = ModelArtifact(
        spec=ModelSpec.from_dict(body["spec"]),
        feature_names=list(body["feature_names"]),
        payload=body["payload"],
        preprocessor=body.get("preprocessor"),
        metadata=body.get("metadata", {}),
    )
    if artifact.content_hash() != document.get("sha256"):
        raise PersistenceError(f"{path} failed its content-hash check (corrupt or edited)")
    return artifact
