# Standard library imports
import os
import json
from pathlib import Path

DEFAULT_CONFIG_PATH = Path(__file__).with_name("config.json")


class Config:
    """
    A class for managing configuration settings.

    This class loads the configuration from a JSON file and provides methods
    to retrieve configuration values by key. The file is `config/config.json`
    unless the `BWHIN_CONFIG` environment variable points somewhere else.
    """

    config = None

    @classmethod
    def load_config(cls):
        """
        Load the configuration from the JSON file.

        If the configuration is already loaded, this method does nothing.
        """
        if cls.config is None:
            path = os.environ.get("BWHIN_CONFIG", DEFAULT_CONFIG_PATH)
            with open(path, "r") as f:
                cls.config = json.load(f)

    @classmethod
    def reset(cls):
        """
        Drop the cached configuration so the next access re-reads the file.
        """
        cls.config = None

    @classmethod
    def get(cls, key, default=None):
        """
        Get the value of a configuration setting by key.

        Args:
            key (str): The key of the configuration setting to retrieve.
            default: Value returned when the key is missing.

        Returns:
            The value of the configuration setting, or `default` if the key is not found.
        """
        if cls.config is None:
            cls.load_config()
        return cls.config.get(key, default)

    @classmethod
    def dataset_defaults(cls, dataset: str) -> dict:
        """
        Get the default hyperparameter block of a dataset.

        Args:
            dataset (str): Dataset name, "mnist" or "cifar10".

        Returns:
            dict: A copy of the dataset's default hyperparameters.

        Raises:
            ValueError: If the dataset has no defaults.
        """
        datasets = cls.get("datasets", {})
        if dataset not in datasets:
            raise ValueError(f"Unsupported dataset: {dataset}")
        return dict(datasets[dataset])
