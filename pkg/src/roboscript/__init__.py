"""roboscript: natural-language robot programming at desk scale.

Pipeline: English instruction -> seq2seq translation -> RoboScript program
-> sandboxed execution against a detected scene (constraint solver for
placement tasks, mock move/grip robot for manipulation tasks) -> execution
-based accuracy metric against the ground-truth program.
"""

__version__ = "0.1.0"
