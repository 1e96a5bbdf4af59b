import pytest

from camsel_exporter.dataset import make_toy_dataset


@pytest.fixture(scope="session")
def toy_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    return make_toy_dataset(root, images_per_class=6, size=24, seed=0)


def fast_job_kwargs(data, out_dir, **overrides):
    """Training settings that converge on the toy data in seconds."""
    kwargs = dict(
        dataset=str(data.root),
        backbone="tiny2",
        output_dir=str(out_dir),
        input_size=24,
        seed=0,
        batch_size=8,
        learning_rate=0.01,
        epochs=30,
        max_epochs=25,
        stop_accuracy=0.95,
    )
    kwargs.update(overrides)
    return kwargs
