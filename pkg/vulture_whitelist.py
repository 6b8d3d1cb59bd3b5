# pylint: skip-file
# type: ignore

_.process_result  # click result callback (mixchaos/cli.py)
_.log_timestamps  # read through GlobalOptions (mixchaos/types.py)
_.console_summary  # set by commands that style their summary (mixchaos/types.py)
