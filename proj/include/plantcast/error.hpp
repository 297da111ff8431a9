#pragma once

#include <stdexcept>
#include <string>

namespace plantcast {

// Root of every error the library throws. `DataError` covers bad inputs
// (files, config, shapes); anything else escaping a stage is an internal fault.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class IngestError : public DataError { public: using DataError::DataError; };
class FormatError : public DataError { public: using DataError::DataError; };
class EmptySeriesError : public DataError { public: using DataError::DataError; };
class SplitError : public DataError { public: using DataError::DataError; };
class AlignmentError : public DataError { public: using DataError::DataError; };
class DegenerateWindowError : public DataError { public: using DataError::DataError; };
class LookupError : public DataError { public: using DataError::DataError; };
class ShapeError : public DataError { public: using DataError::DataError; };
class FitError : public DataError { public: using DataError::DataError; };
class GapError : public DataError { public: using DataError::DataError; };
class ConfigError : public DataError { public: using DataError::DataError; };
class IoError : public DataError { public: using DataError::DataError; };

// Misuse of a stateful object (e.g. transforming with an unfitted scaler).
class StateError : public Error { public: using Error::Error; };

} // namespace plantcast
