//! Scene manifest pipeline driver.
