#include "ctalab/app.hpp"

int main(int argc, char** argv) { return ctalab::app::run_command(argc, argv); }
