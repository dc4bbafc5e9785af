"""
centralized logging configuration for the distributed scopf solver.
"""

import logging
import os
from logging.handlers import TimedRotatingFileHandler
from typing import Optional

LOGS_DIR = "logs"


class LoggerFactory:
    """
    configures and provides loggers for different parts of the application.
    """

    LOG_FORMAT = "%(asctime)s - %(levelname)s - [%(name)s] - %(message)s"

    # subsystem loggers, each with its own rotating file
    SUBSYSTEMS = ("case", "solver", "scopf", "oracle", "pipeline")

    @staticmethod
    def setup_loggers(log_dir: Optional[str] = None, console_level: int = logging.INFO) -> None:
        """
        sets up the root logger and one handler set per subsystem.
        this should be called once at the start of the application (the cli does it).
        """
        log_dir = log_dir or LOGS_DIR
        os.makedirs(log_dir, exist_ok=True)
        formatter = logging.Formatter(LoggerFactory.LOG_FORMAT)

        root_logger = logging.getLogger()
        root_logger.setLevel(logging.DEBUG)

        # clear any existing handlers to prevent duplicates on successive calls
        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)
            handler.close()

        console_handler = logging.StreamHandler()
        console_handler.setLevel(console_level)
        console_handler.setFormatter(formatter)
        root_logger.addHandler(console_handler)

        main_handler = TimedRotatingFileHandler(
            os.path.join(log_dir, "main.log"), when="D", interval=1, backupCount=7, encoding="utf-8"
        )
        main_handler.setFormatter(formatter)
        root_logger.addHandler(main_handler)

        # children such as 'solver.scheduler' inherit these handlers
        for name in LoggerFactory.SUBSYSTEMS:
            subsystem_logger = logging.getLogger(name)
            for handler in subsystem_logger.handlers[:]:
                subsystem_logger.removeHandler(handler)
                handler.close()
            subsystem_logger.setLevel(logging.DEBUG)
            subsystem_logger.propagate = False
            file_handler = TimedRotatingFileHandler(
                os.path.join(log_dir, f"{name}.log"), when="D", interval=1, backupCount=7, encoding="utf-8"
            )
            file_handler.setFormatter(formatter)
            subsystem_logger.addHandler(file_handler)
            subsystem_logger.addHandler(console_handler)

    @staticmethod
    def get_logger(name: str) -> logging.Logger:
        """
        returns a logger with the specified name.
        """
        return logging.getLogger(name)
