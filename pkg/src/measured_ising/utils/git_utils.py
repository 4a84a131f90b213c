import logging
from pathlib import Path
from typing import Dict, Optional

logger = logging.getLogger(__name__)


class GitUtils:
    """Utility class for Git operations"""

    @staticmethod
    def describe(repo_path: Path) -> Optional[Dict[str, object]]:
        """Commit hash and dirty flag of the repository containing repo_path, or None."""
        try:
            # GitPython raises ImportError when no git executable is installed
            import git
        except ImportError as e:
            logger.debug(f"GitPython unavailable: {e}")
            return None
        try:
            repo = git.Repo(repo_path, search_parent_directories=True)
            return {"commit": repo.head.commit.hexsha, "dirty": repo.is_dirty(untracked_files=False)}
        except (git.InvalidGitRepositoryError, git.NoSuchPathError, ValueError) as e:
            logger.debug(f"No git metadata for {repo_path}: {e}")
            return None
