#    bevtrack 0.1
#    Copyright (C) 2024-2026  The bevtrack authors
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.


"""
:synopsis: bevtrack 0.1.
"""


# standard library imports
import os
import sys
import logging
import tempfile

# third party imports

# library specific imports
import src.cli
import src.output_formatter

prog = "bevtrack"


def main(argv=None):
    """Main function.

    :param list argv: arguments (sys.argv if None)
    """
    logging.basicConfig(
        filename=os.path.join(tempfile.gettempdir(), f"{prog}.log"),
        format="[%(asctime)s] %(levelname)s %(name)s: %(message)s",
        level=logging.INFO,
    )
    logger = logging.getLogger(main.__name__)
    command_line = src.cli.CommandLine()
    try:
        for line in command_line.run(sys.argv[1:] if argv is None else argv):
            print(line)
    except Exception as exception:
        code = src.cli.exit_code(exception)
        if code == 1:
            logger.exception(exception)
            raise SystemExit("an unexpected error occurred")
        logger.error(exception)
        print(src.output_formatter.pprint_error(exception), file=sys.stderr)
        raise SystemExit(code)


if __name__ == "__main__":
    main()
