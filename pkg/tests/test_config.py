import pytest
from pydantic import ValidationError

from app.core.config import Settings, load_settings
from app.models.config_models import ExperimentSpec, PipelineConfig, WalkConfig, default_stopwords


def test_settings_from_file(tmp_path):
    path = tmp_path / "gtpm.env"
    path.write_text("MIN_COUNT=3\nWALK_LENGTH=7\nSEED=5\n")
    settings = load_settings(str(path))
    assert settings.min_count == 3
    assert settings.pipeline_config().min_count == 3
    assert settings.walk_config().walk_length == 7
    assert settings.walk_config().embedding_dim == 64


def test_overrides_beat_file(tmp_path):
    path = tmp_path / "gtpm.env"
    path.write_text("SEED=5\n")
    settings = load_settings(str(path), seed=9, threads=None)
    assert settings.seed == 9
    assert settings.threads == 1


def test_cors_origins():
    assert Settings(cors_origins="a.com, b.com").get_cors_origins == ["a.com", "b.com"]
    assert Settings(cors_origins="*").get_cors_origins == ["*"]


def test_train_config_from_settings():
    config = Settings(hidden_layers=[32, 16], learning_rate=0.002, dropout=0.5).train_config()
    assert config.hidden_layers == (32, 16)
    assert (config.learning_rate, config.dropout) == (0.002, 0.5)
    with pytest.raises(ValidationError):
        Settings(learning_rate=0.3).train_config()


def test_walk_count_rule():
    config = WalkConfig(walk_length=5)
    assert config.resolve(40.0).walks_per_node == 1
    assert config.resolve(39.9).walks_per_node == 4
    assert WalkConfig(walks_per_node=3).resolve(100.0).walks_per_node == 3


def test_walk_digest_ignores_threads():
    assert WalkConfig(threads=1).digest() == WalkConfig(threads=4).digest()
    assert WalkConfig(master_seed=1).digest() != WalkConfig(master_seed=2).digest()


def test_pipeline_digest():
    assert PipelineConfig().digest() == PipelineConfig().digest()
    assert PipelineConfig(min_count=2).digest() != PipelineConfig(min_count=3).digest()


def test_custom_stopwords(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("Foo\nbar!\n\n")
    config = PipelineConfig.with_stopwords(path, min_count=1)
    assert config.stopwords == frozenset({"foo", "bar"})
    assert "the" in default_stopwords()


def test_experiment_spec_validation():
    with pytest.raises(ValidationError):
        ExperimentSpec(walk_lengths=[0])
    with pytest.raises(ValidationError):
        ExperimentSpec(walks_per_node=[0])
    with pytest.raises(ValidationError):
        ExperimentSpec(repeats=0)
    summary = ExperimentSpec(name="x").summary()
    assert summary["corpus"] == "<memory>"
