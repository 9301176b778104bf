import os
import tempfile


def get_data(relative_path: str) -> str:
    """
    Get the file path to some data in the stcausal package.

    Parameters:
        relative_path: The relative path to the data
    """

    from importlib.resources import files

    fn = str(files("stcausal").joinpath("data", relative_path))

    if not os.path.exists(fn):
        raise ValueError(
            f"Sorry! {fn} does not exist. If you just added it, you'll have to re-install"
        )

    return fn


def atomic_write_text(file_name: str, text: str) -> str:
    """
    Write text to a temporary file next to ``file_name`` then rename it into place, so
    readers never see a partially written file.

    Returns:
        The name of the file which was written.
    """
    directory = os.path.dirname(os.path.abspath(file_name))
    os.makedirs(directory, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(
        dir=directory, prefix=".tmp-", suffix=os.path.basename(file_name)
    )
    try:
        with os.fdopen(handle, "w", newline="\n") as output:
            output.write(text)
        os.chmod(temp_name, 0o644)
        os.replace(temp_name, file_name)
    finally:
        if os.path.exists(temp_name):
            os.remove(temp_name)
    return file_name
