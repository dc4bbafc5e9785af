# oracle package