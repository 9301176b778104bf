from stcausal.utils.utils import atomic_write_text, get_data

__all__ = ["atomic_write_text", "get_data"]
