#include "adamcert/cli.hpp"

int main(int argc, char** argv) { return adamcert::cli_main(argc, argv); }
