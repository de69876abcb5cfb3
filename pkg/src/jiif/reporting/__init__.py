from src.jiif.reporting.renderer import ReportRenderer

__all__ = ["ReportRenderer"]
