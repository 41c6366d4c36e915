#include "cli_app.hpp"

int main(int argc, char** argv) { return chronos::cli::run(argc, argv); }
